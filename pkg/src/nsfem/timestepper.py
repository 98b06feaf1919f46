"""Graded time grids and the fully discrete semi-implicit Euler loop.

One linear saddle solve per step: the convection velocity is frozen at the
previous step, so no nonlinear iteration exists anywhere.  Every step logs
the discrete energy identity

    (|u^n|^2 - |u^{n-1}|^2) / (2 tau_n)
    + (tau_n / 2) |(u^n - u^{n-1}) / tau_n|^2 + mu |grad u^n|^2 = 0,

whose residual is the sharpest cheap probe of divergence-freedom,
convection assembly and the solve.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from .assembly import (assemble_convection, assemble_divergence,
                       assemble_mass, assemble_stiffness, restrict_matrix,
                       scatter_free)
from .errors import InvalidStateError
from .saddle import SaddleSystem, solve
from .space import FEFunction

NEIGHBOR_RATIO_BOUND = 4.0
GRADING_BOUND = 8.0


class GradedGrid:
    """Time partition realizing tau_n ~ (t_{n-1}/T)^alpha * tau."""

    def __init__(self, T, tau, alpha, times):
        self.T = float(T)
        self.tau = float(tau)
        self.alpha = float(alpha)
        self.times = np.asarray(times, dtype=float)
        self.steps = np.diff(self.times)
        self.N = len(self.steps)

    def __repr__(self):
        return (f"GradedGrid(T={self.T}, tau={self.tau}, "
                f"alpha={self.alpha}, N={self.N})")

    def validate(self):
        """Check every grid invariant; raises InvalidStateError on failure."""
        t, dt = self.times, self.steps
        ok = 1e-9
        if t[0] != 0.0 or abs(t[-1] - self.T) > 1e-12 * self.T:
            raise InvalidStateError("grid must run from 0 to T exactly")
        if np.any(dt <= 0):
            raise InvalidStateError("times must be strictly increasing")
        if dt.max() > self.tau * (1.0 + ok):
            raise InvalidStateError(
                f"maximal step {dt.max():.3e} exceeds tau={self.tau:.3e}")
        if dt.max() < self.tau / 4.0 * (1.0 - ok):
            raise InvalidStateError("maximal step fell below tau/4")
        if self.N >= 2:
            ratios = dt[1:] / dt[:-1]
            if ratios.max() > NEIGHBOR_RATIO_BOUND * (1 + ok) or \
               ratios.min() < 1.0 / NEIGHBOR_RATIO_BOUND * (1 - ok):
                raise InvalidStateError(
                    f"neighbor stepsize ratio outside [1/4, 4]: "
                    f"[{ratios.min():.3g}, {ratios.max():.3g}]")
            target = (t[1:-1] / self.T) ** self.alpha * self.tau
            grading = dt[1:] / target
            if grading.max() > GRADING_BOUND * (1 + ok) or \
               grading.min() < 1.0 / GRADING_BOUND * (1 - ok):
                raise InvalidStateError(
                    f"grading ratio outside [1/8, 8]: "
                    f"[{grading.min():.3g}, {grading.max():.3g}]")
        bound = math.ceil(2.0 * self.T / ((1.0 - self.alpha) * self.tau))
        if self.N > bound:
            raise InvalidStateError(f"step count {self.N} exceeds bound {bound}")
        return True


def build_graded_grid(T, tau, alpha):
    """Construct the graded grid.

    The primary realization is t_n = T (n/N)^gamma with gamma = 1/(1-alpha)
    and N = ceil(gamma T / tau).  For gamma > log2(5) that power law breaks
    the neighbor-ratio invariant in its first steps (tau_2/tau_1 = 2^gamma-1),
    so the grid falls back to the direct stepsize recursion
    tau_n = (t_{n-1}/T)^alpha * tau started at t_1 = T (tau/T)^gamma, whose
    consecutive ratios never exceed 2.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if not 0 < tau <= T:
        raise ValueError("tau must lie in (0, T]")
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
    gamma = 1.0 / (1.0 - alpha)
    N = math.ceil(gamma * T / tau - 1e-12)
    times = T * (np.arange(N + 1) / N) ** gamma
    dt = np.diff(times)
    if N >= 2 and (dt[1:] / dt[:-1]).max() > NEIGHBOR_RATIO_BOUND:
        times = T * np.asarray(_recursive_grid(tau / T, alpha))
    grid = GradedGrid(T, tau, alpha, times)
    grid.validate()
    return grid


def _recursive_grid(sigma, alpha):
    """Unit-interval graded times by the stepsize recursion."""
    gamma = 1.0 / (1.0 - alpha)
    s1 = sigma ** gamma
    if s1 >= 1.0 - 1e-15:
        return [0.0, 1.0]
    s = [0.0, s1]
    while True:
        nxt = s[-1] + s[-1] ** alpha * sigma
        if nxt >= 1.0 - 1e-15:
            break
        s.append(nxt)
    remainder = 1.0 - s[-1]
    last = s[-1] - s[-2]
    if remainder >= 0.25 * last or len(s) < 3:
        s.append(1.0)
    else:
        # splitting [s[-2], 1] into two equal steps keeps the ratio bounds
        s[-1] = 0.5 * (s[-2] + 1.0)
        s.append(1.0)
    return s


class EnergyLedger:
    """Per-step norms, increments and the energy-identity residual."""

    COLUMNS = ("step", "t", "tau", "l2_sq", "h1_sq", "inc_sq",
               "energy_residual", "weighted_increment", "weighted_h1")

    def __init__(self):
        self.rows = []

    def append(self, **kw):
        self.rows.append(tuple(kw[c] for c in self.COLUMNS))

    def column(self, name):
        i = self.COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    def to_csv(self, stream):
        stream.write(",".join(self.COLUMNS) + "\n")
        for row in self.rows:
            stream.write(",".join(_fmt(v) for v in row) + "\n")

    def validate(self, mu, tol_scale=1e-9):
        """Residual bound and the basic energy estimate, every step.

        The residual bound here is the flat per-step 1e-9 |u0|^2; the
        step postcondition allows the weaker 1e-9 |u0|^2 / tau_n.
        """
        l2 = self.column("l2_sq")
        res = self.column("energy_residual")
        tau = self.column("tau")
        u0_sq = l2[0]
        bound = tol_scale * max(u0_sq, 1e-30)
        if np.any(np.abs(res[1:]) > bound):
            raise InvalidStateError("energy identity residual out of tolerance")
        if np.any(np.diff(l2) > 1e-12 * max(u0_sq, 1e-30)):
            raise InvalidStateError("kinetic energy increased across a step")
        h1 = self.column("h1_sq")
        dissipated = 2.0 * mu * float(np.sum(tau[1:] * h1[1:]))
        if dissipated > u0_sq + 1e-8:
            raise InvalidStateError("cumulative dissipation exceeds |u0|^2")
        return True


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class RunOperators:
    """Matrices shared by every step of a run on one space pair."""

    def __init__(self, V, Q, backend="direct", rtol=1e-10):
        self.V = V
        self.Q = Q
        self.backend = backend
        self.rtol = rtol
        self.M = assemble_mass(V)
        self.K = assemble_stiffness(V)
        self.B = assemble_divergence(V, Q)
        free = V.free_dofs
        self.M_ff = restrict_matrix(self.M, free, free)
        self.K_ff = restrict_matrix(self.K, free, free)
        self.B_f = self.B[:, free].tocsr()
        self.pressure_mass_diag = np.repeat(2.0 * Q.mesh.areas, Q.block_size)

    def norms_sq(self, coeffs):
        return (float(coeffs @ (self.M @ coeffs)),
                float(coeffs @ (self.K @ coeffs)))


def step(u_prev, tau_n, mu, V, Q, ops=None, backend="direct",
         divfree_tol=1e-9, include_convection=True):
    """One semi-implicit Euler step; returns (u_next, p_next, report).

    ``include_convection=False`` drops the frozen convection term, leaving
    the plain implicit-Euler Stokes step (a testing hook, not a scheme
    variant).
    """
    ops = ops or RunOperators(V, Q, backend=backend)
    free = V.free_dofs
    c_prev = u_prev.coeffs
    div_res = np.linalg.norm(ops.B @ c_prev)
    if div_res > divfree_tol * max(1.0, np.linalg.norm(c_prev)):
        raise InvalidStateError(
            f"previous iterate is not discretely divergence-free "
            f"(|B u| = {div_res:.3e})")
    A = (ops.M_ff / tau_n + mu * ops.K_ff).tocsc()
    if include_convection:
        N_full = assemble_convection(V, u_prev)
        A = (A + restrict_matrix(N_full, free, free)).tocsc()
    f = (ops.M @ c_prev)[free] / tau_n
    system = SaddleSystem(A=A, B=ops.B_f, f=f, constraints=Q.constraints,
                          backend=ops.backend, rtol=ops.rtol,
                          pressure_mass_diag=ops.pressure_mass_diag)
    u_free, p, report = solve(system)
    u_next = FEFunction(V, scatter_free(V, u_free))
    p_next = FEFunction(Q, p)
    return u_next, p_next, report


def energy_residual(ops, u_prev, u_next, tau_n, mu):
    du = u_next.coeffs - u_prev.coeffs
    l2n, h1n = ops.norms_sq(u_next.coeffs)
    l2p, _ = ops.norms_sq(u_prev.coeffs)
    inc = float(du @ (ops.M @ du))
    return (l2n - l2p) / (2.0 * tau_n) + inc / (2.0 * tau_n) + mu * h1n, \
        l2n, h1n, inc


@dataclass
class RunResult:
    final: FEFunction
    ledger: EnergyLedger
    checkpoints: dict
    grid: object


def run(initial, grid, mu, V, Q, checkpoints=(), backend="direct",
        data_rule=None, rtol=1e-10):
    """Advance the scheme over the whole grid from the given initial data.

    ``initial`` is either an FE velocity (used as u_h^0 directly) or a
    point-evaluable field, which is first projected onto the discrete
    divergence-free subspace.  ``checkpoints`` lists step indices whose
    velocity coefficients are retained.
    """
    from .projections import l2_project_divfree
    if isinstance(initial, FEFunction):
        u = initial
    else:
        u, _ = l2_project_divfree(initial, V, Q, rule=data_rule,
                                  backend=backend)
    ops = RunOperators(V, Q, backend=backend, rtol=rtol)
    ledger = EnergyLedger()
    l2, h1 = ops.norms_sq(u.coeffs)
    ledger.append(step=0, t=0.0, tau=np.nan, l2_sq=l2, h1_sq=h1, inc_sq=0.0,
                  energy_residual=0.0, weighted_increment=0.0,
                  weighted_h1=0.0)
    wanted = set(int(i) for i in checkpoints)
    saved = {0: u.copy()} if 0 in wanted else {}
    for n in range(1, grid.N + 1):
        tau_n = float(grid.steps[n - 1])
        t_n = float(grid.times[n])
        try:
            u_next, _, _ = step(u, tau_n, mu, V, Q, ops=ops)
        except Exception as exc:
            exc.partial_ledger = ledger
            raise
        res, l2, h1, inc = energy_residual(ops, u, u_next, tau_n, mu)
        ledger.append(step=n, t=t_n, tau=tau_n, l2_sq=l2, h1_sq=h1,
                      inc_sq=inc, energy_residual=res,
                      weighted_increment=t_n * math.sqrt(inc) / tau_n,
                      weighted_h1=math.sqrt(t_n * h1))
        u = u_next
        if n in wanted:
            saved[n] = u.copy()
    return RunResult(final=u, ledger=ledger, checkpoints=saved, grid=grid)


_CKPT_MAGIC = b"NSCK"


def write_checkpoint(path, u, step_index, t):
    """Binary checkpoint: header (mesh n, degree, step, t) + coefficients."""
    mesh = u.space.mesh
    prov = mesh.provenance
    base_n = 0
    alfeld = 1 if mesh.is_alfeld else 0
    inner = prov[1] if mesh.is_alfeld else prov
    if isinstance(inner, tuple) and inner and inner[0] == "structured":
        base_n = inner[1]
    header = struct.pack("<4sIIIIqd", _CKPT_MAGIC, 1, base_n, alfeld,
                         u.space.degree, int(step_index), float(t))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<q", u.coeffs.size))
        fh.write(u.coeffs.tobytes())


def read_checkpoint(path):
    """Returns (header dict, coefficient array)."""
    with open(path, "rb") as fh:
        raw = fh.read(struct.calcsize("<4sIIIIqd"))
        magic, version, base_n, alfeld, degree, step_index, t = \
            struct.unpack("<4sIIIIqd", raw)
        if magic != _CKPT_MAGIC:
            raise ValueError("not a checkpoint file")
        (ncoef,) = struct.unpack("<q", fh.read(8))
        coeffs = np.frombuffer(fh.read(8 * ncoef), dtype=np.float64)
    header = dict(version=version, mesh_n=base_n, alfeld=bool(alfeld),
                  degree=degree, step=step_index, t=t)
    return header, coeffs.copy()
