"""Command-line driver.

Subcommands: ``run``, ``study-time``, ``study-space``, ``project``,
``check`` and ``infsup``.  Options resolve as defaults < config file <
command-line flags; stepsize labels are exact rationals ("1/160") so report
labels never drift.  Exit status: 0 success, 1 a property or acceptance
failure, 2 usage error.
"""

import argparse
import os
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import NumericDataError
from .initial_data import EPSILON, EXAMPLES
from .mesh import alfeld_split, build_structured_mesh
from .space import build_pressure_space, build_velocity_space, \
    divergence_values
from .element import quadrature


@dataclass
class RunConfig:
    """Resolved configuration; defaults reproduce the reference experiments:
    unit square, T=0.1, mu=0.05, alpha=0.55, k=4, eps=0.01, tau_ref=1/1280,
    h_ref=1/128."""

    example: str = "example1"
    T: float = 0.1
    mu: float = 0.05
    alpha: float = 0.55
    k: int = 4
    n: int = 16
    tau: Fraction = Fraction(1, 80)
    taus: tuple = (Fraction(1, 40), Fraction(1, 80), Fraction(1, 160))
    tau_ref: Fraction = Fraction(1, 1280)
    n_ref: int = 128
    ns: tuple = (8, 16, 32)
    alfeld: bool = None
    backend: str = "direct"
    rtol: float = 1e-10
    out: str = "."
    seed: int = 0
    jobs: int = 1
    eps: float = EPSILON

    def __post_init__(self):
        if not 0.5 < self.alpha <= 0.8:
            raise ValueError(
                f"alpha={self.alpha} outside the supported range (0.5, 0.8]")
        if self.example not in EXAMPLES:
            raise ValueError(f"unknown example {self.example!r}; choose from "
                             f"{sorted(EXAMPLES)}")

    def use_alfeld(self):
        return self.alfeld if self.alfeld is not None else self.k < 4

    def spaces(self, n=None):
        mesh = build_structured_mesh(n if n is not None else self.n)
        if self.use_alfeld():
            mesh = alfeld_split(mesh)
        V = build_velocity_space(mesh, self.k)
        Q = build_pressure_space(mesh, self.k - 1)
        return V, Q

    def initial_field(self):
        maker = EXAMPLES[self.example]
        if self.example == "manufactured":
            return maker()
        return maker(self.eps)

    def print_config(self, stream):
        stream.write("omega = (0,1)x(0,1)\n")
        for f in fields(self):
            stream.write(f"{f.name} = {_show(getattr(self, f.name))}\n")


def _show(value):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (tuple, list)):
        return ",".join(_show(v) for v in value)
    return str(value)


def parse_fraction(text):
    return Fraction(text)


def _parse_value(name, text):
    text = text.strip()
    if name in ("tau", "tau_ref"):
        return Fraction(text)
    if name == "taus":
        return tuple(Fraction(t) for t in text.split(","))
    if name in ("ns",):
        return tuple(int(t) for t in text.split(","))
    if name in ("k", "n", "n_ref", "seed", "jobs"):
        return int(text)
    if name in ("T", "mu", "alpha", "rtol", "eps"):
        return float(text)
    if name == "alfeld":
        if text.lower() in ("none", "auto"):
            return None
        return text.lower() in ("1", "true", "yes", "on")
    return text


def load_config_file(path):
    """Flat `key = value` text; '#' starts a comment."""
    values = {}
    known = {f.name for f in fields(RunConfig)}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected `key = value`")
        key, _, val = line.partition("=")
        key = key.strip()
        if key == "omega":
            continue
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, val)
    return values


def _resolve_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return RunConfig(**values)


def _common_flags(p):
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved configuration and exit")
    p.add_argument("--example", choices=sorted(EXAMPLES))
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--mu", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--backend", choices=("direct", "iterative"))
    p.add_argument("--rtol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int,
                   default=_env_jobs())
    p.add_argument("--out", help="output directory for CSV reports")
    p.add_argument("--alfeld", action="store_const", const=True,
                   help="force the Alfeld split (automatic for k<4)")


def _env_jobs():
    raw = os.environ.get("NS_CRITICAL_THREADS")
    return int(raw) if raw else None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nsfem",
        description="2D incompressible Navier-Stokes solver with "
                    "divergence-free elements and graded time grids")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="advance one configuration and write the "
                                   "energy ledger")
    _common_flags(p)
    p.add_argument("--n", type=int, help="mesh subdivisions per side")
    p.add_argument("--tau", type=parse_fraction, help="maximal stepsize")
    p.add_argument("--ledger", help="ledger CSV path")
    p.add_argument("--checkpoint", help="write the final state here")

    p = sub.add_parser("study-time", help="time-convergence study on a "
                                          "fixed mesh")
    _common_flags(p)
    p.add_argument("--h", type=int, dest="n",
                   help="mesh subdivisions (h = 1/n)")
    p.add_argument("--taus", type=lambda s: tuple(
        Fraction(t) for t in s.split(",")))
    p.add_argument("--tau-ref", type=parse_fraction, dest="tau_ref")
    p.add_argument("--csv", help="report CSV path")

    p = sub.add_parser("study-space", help="space-convergence study at a "
                                           "fixed stepsize")
    _common_flags(p)
    p.add_argument("--hs", type=lambda s: tuple(int(t) for t in s.split(",")),
                   dest="ns", help="mesh subdivisions list (h = 1/n)")
    p.add_argument("--h-ref", type=int, dest="n_ref")
    p.add_argument("--tau", type=parse_fraction)
    p.add_argument("--csv", help="report CSV path")

    p = sub.add_parser("project", help="compute the discrete initial datum "
                                       "and report its norms")
    _common_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--checkpoint", help="write the projected state here")

    p = sub.add_parser("check", help="run the property suite")
    _common_flags(p)
    p.add_argument("--fast", action="store_true",
                   help="k=2 Alfeld n=4 configuration (seconds)")
    p.add_argument("--n", type=int)

    p = sub.add_parser("infsup", help="compute the discrete inf-sup constant")
    _common_flags(p)
    p.add_argument("--n", type=int)
    return parser


def _outdir(cfg):
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args):
    cfg = _resolve_config(args)
    if args.print_config:
        cfg.print_config(sys.stdout)
        return 0
    from .timestepper import build_graded_grid, run, write_checkpoint
    V, Q = cfg.spaces()
    grid = build_graded_grid(cfg.T, float(cfg.tau), cfg.alpha)
    result = run(cfg.initial_field(), grid, cfg.mu, V, Q,
                 backend=cfg.backend, rtol=cfg.rtol)
    led = result.ledger
    led.validate(cfg.mu)
    path = args.ledger or _outdir(cfg) / (
        f"run_{cfg.example}_n{cfg.n}_k{cfg.k}_tau{cfg.tau.numerator}-"
        f"{cfg.tau.denominator}.csv")
    with open(path, "w") as fh:
        led.to_csv(fh)
    l2 = led.column("l2_sq")
    print(f"run: {cfg.example} n={cfg.n} k={cfg.k} tau={_show(cfg.tau)} "
          f"N={grid.N}")
    print(f"  |u0| = {np.sqrt(l2[0]):.6e}  |u_N| = {np.sqrt(l2[-1]):.6e}")
    print(f"  max energy residual = "
          f"{np.abs(led.column('energy_residual')[1:]).max():.3e}")
    print(f"  ledger -> {path}")
    if args.checkpoint:
        write_checkpoint(args.checkpoint, result.final, grid.N, grid.T)
        print(f"  checkpoint -> {args.checkpoint}")
    return 0


def cmd_study_time(args):
    cfg = _resolve_config(args)
    if args.print_config:
        cfg.print_config(sys.stdout)
        return 0
    from .study import run_time_study
    V, Q = cfg.spaces()
    report = run_time_study(
        cfg.initial_field(), V, Q, list(cfg.taus), cfg.tau_ref,
        T=cfg.T, mu=cfg.mu, alpha=cfg.alpha, backend=cfg.backend,
        rtol=cfg.rtol, jobs=cfg.jobs,
        config_extra={"example": cfg.example, "seed": cfg.seed})
    path = args.csv or _outdir(cfg) / f"study_time_{cfg.example}_h{cfg.n}.csv"
    report.save(path)
    _print_report(report, path)
    return 0


def cmd_study_space(args):
    cfg = _resolve_config(args)
    if args.print_config:
        cfg.print_config(sys.stdout)
        return 0
    from .study import run_space_study
    report = run_space_study(
        cfg.initial_field(), cfg.spaces, list(cfg.ns), cfg.n_ref,
        float(cfg.tau), T=cfg.T, mu=cfg.mu, alpha=cfg.alpha,
        backend=cfg.backend, rtol=cfg.rtol, jobs=cfg.jobs,
        config_extra={"example": cfg.example, "k": cfg.k, "seed": cfg.seed})
    path = args.csv or _outdir(cfg) / (
        f"study_space_{cfg.example}_tau{cfg.tau.numerator}-"
        f"{cfg.tau.denominator}.csv")
    report.save(path)
    _print_report(report, path)
    return 0


def _print_report(report, path):
    print(f"{report.kind} study")
    for label, err in report.rows:
        print(f"  {label:>8}  {err:.6e}")
    print(f"  rate (least squares) = {report.rate_ls:.3f}")
    print(f"  rate (last interval) = {report.rate_last:.3f}")
    print(f"  report -> {path}")


def cmd_project(args):
    cfg = _resolve_config(args)
    if args.print_config:
        cfg.print_config(sys.stdout)
        return 0
    from .projections import l2_project_divfree
    from .study import h1_seminorm, l2_norm
    from .timestepper import write_checkpoint
    V, Q = cfg.spaces()
    u0, eta = l2_project_divfree(cfg.initial_field(), V, Q,
                                 backend=cfg.backend)
    div = np.abs(divergence_values(u0, quadrature(2 * cfg.k))).max()
    print(f"project: {cfg.example} n={cfg.n} k={cfg.k}")
    print(f"  |u0_h|_L2 = {l2_norm(u0):.8e}")
    print(f"  |grad u0_h|_L2 = {h1_seminorm(u0):.8e}")
    print(f"  max pointwise divergence = {div:.3e}")
    print(f"  solve residual = {u0.solve_report.residual:.3e}")
    if args.checkpoint:
        write_checkpoint(args.checkpoint, u0, 0, 0.0)
        print(f"  checkpoint -> {args.checkpoint}")
    return 0


def cmd_check(args):
    cfg = _resolve_config(args)
    if args.print_config:
        cfg.print_config(sys.stdout)
        return 0
    from .propsuite import run_suite
    n = cfg.n if getattr(args, "n", None) is not None else 4
    failures = run_suite(fast=args.fast, seed=cfg.seed, n=n, k=2)
    return 1 if failures else 0


def cmd_infsup(args):
    cfg = _resolve_config(args)
    if args.print_config:
        cfg.print_config(sys.stdout)
        return 0
    from .saddle import infsup_constant
    V, Q = cfg.spaces()
    beta = infsup_constant(V, Q)
    kind = "alfeld" if cfg.use_alfeld() else "plain"
    print(f"infsup: n={cfg.n} k={cfg.k} ({kind}) beta_h = {beta:.6f}")
    return 0


_COMMANDS = {
    "run": cmd_run,
    "study-time": cmd_study_time,
    "study-space": cmd_study_space,
    "project": cmd_project,
    "check": cmd_check,
    "infsup": cmd_infsup,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, NumericDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
