"""Runtime property suite behind the ``check`` subcommand.

Every check returns a :class:`CheckResult`; the suite prints one PASS/FAIL
line per check.  The fast configuration (k=2 on an Alfeld n=4 mesh) runs in
seconds; the full configuration adds the k=4 pair and a finer mesh.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .assembly import (assemble_convection, assemble_divergence,
                       assemble_mass, assemble_stiffness)
from .element import quadrature, reference_monomial_integral
from .initial_data import initial_data_example1, smooth_curl_field
from .mesh import alfeld_split, build_structured_mesh, check_conformity, \
    refine_uniform
from .projections import (DiscreteStokesOperator, l2_project_divfree,
                          stokes_ritz_project)
from .saddle import infsup_constant, make_system, solve
from .space import (FEFunction, build_pressure_space, build_velocity_space,
                    divergence_values)
from .study import cell_gradients, h1_seminorm, l2_norm
from .timestepper import build_graded_grid, run


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _spaces(n, k):
    mesh = build_structured_mesh(n)
    if k < 4:
        mesh = alfeld_split(mesh)
    V = build_velocity_space(mesh, k)
    Q = build_pressure_space(mesh, k - 1)
    return V, Q


def check_mesh_conformity(cfg):
    n = cfg["n"]
    base = build_structured_mesh(n)
    meshes = [base, refine_uniform(base), alfeld_split(base)]
    worst = 0.0
    for m in meshes:
        check_conformity(m)
        worst = max(worst, abs(float(m.areas.sum()) - 1.0))
    return CheckResult("mesh-conformity", worst <= 1e-13,
                       f"max |area sum - 1| = {worst:.2e}")


def check_quadrature_exactness(cfg):
    worst = 0.0
    for d in range(1, 21):
        rule = quadrature(d)
        for a in range(d + 1):
            for b in range(d + 1 - a):
                got = float(np.sum(
                    rule.weights * rule.points[:, 0]**a * rule.points[:, 1]**b))
                ref = float(reference_monomial_integral(a, b))
                worst = max(worst, abs(got - ref) / ref)
    return CheckResult("quadrature-exactness", worst <= 1e-13,
                       f"max rel monomial error = {worst:.2e}")


def check_divergence_inclusion(cfg):
    """Property (P2): div V_h lies in Q_h, via a zero projection remainder."""
    V, Q = _spaces(cfg["n"], cfg["k"])
    rng = np.random.default_rng(cfg["seed"])
    from .space import divergence_coefficients
    rule = quadrature(2 * V.degree)
    worst = 0.0
    for _ in range(20):
        u = FEFunction(V, rng.standard_normal(V.num_dofs))
        div = divergence_values(u, rule)
        coef = divergence_coefficients(u)
        pvals, _ = Q.basis.eval(rule.points)
        recon = np.einsum("cj,qj->cq", coef, pvals)
        num = np.sqrt(np.einsum("q,cq,c->", rule.weights,
                                (div - recon)**2, 2 * V.mesh.areas))
        den = np.sqrt(np.einsum("q,cq,c->", rule.weights, div**2,
                                2 * V.mesh.areas))
        worst = max(worst, num / den)
    return CheckResult("p2-divergence-inclusion", worst <= 1e-11,
                       f"max relative remainder = {worst:.2e}")


def check_skew_convection(cfg):
    V, Q = _spaces(cfg["n"], cfg["k"])
    rng = np.random.default_rng(cfg["seed"])
    w, _ = l2_project_divfree(
        FEFunction(V, rng.standard_normal(V.num_dofs)), V, Q)
    w.coeffs /= max(l2_norm(w), 1e-30)
    N = assemble_convection(V, w)
    M = assemble_mass(V)
    K = assemble_stiffness(V)
    worst = 0.0
    for _ in range(10):
        v = FEFunction(V, np.zeros(V.num_dofs))
        v.coeffs[V.free_dofs] = rng.standard_normal(V.num_free_dofs)
        skew = abs(float(v.coeffs @ (N @ v.coeffs)))
        scale = float(v.coeffs @ (M @ v.coeffs) + v.coeffs @ (K @ v.coeffs))
        worst = max(worst, skew / scale)
    return CheckResult("skew-convection", worst <= 1e-11,
                       f"max |v'N(w)v| / |v|^2 = {worst:.2e}")


def check_graded_grids(cfg):
    count = 0
    for alpha in (0.51, 0.55, 0.75):
        for T in (0.1, 1.0):
            for tau in (Fraction(1, 40), Fraction(1, 160)):
                if tau <= T:
                    build_graded_grid(T, float(tau), alpha).validate()
                    count += 1
    return CheckResult("graded-grid-invariants", True,
                       f"all invariants hold on {count} grids")


def _short_run(cfg, mu=0.05, tau=Fraction(1, 40), n=None, k=None):
    V, Q = _spaces(n or cfg["n"], k or cfg["k"])
    grid = build_graded_grid(0.1, float(tau), 0.55)
    marks = sorted(set(np.linspace(1, grid.N, 5).astype(int)))
    result = run(initial_data_example1(), grid, mu, V, Q, checkpoints=marks)
    return V, Q, result, marks


def check_energy_ledger(cfg):
    V, Q, result, _ = _short_run(cfg)
    led = result.ledger
    led.validate(0.05)
    res = np.abs(led.column("energy_residual")[1:]).max()
    l2 = led.column("l2_sq")
    mono = bool(np.all(np.diff(l2) <= 1e-12 * l2[0]))
    diss = 2 * 0.05 * float(np.sum(led.column("tau")[1:]
                                   * led.column("h1_sq")[1:]))
    ok = mono and diss <= l2[0] + 1e-8
    return CheckResult(
        "energy-ledger", ok,
        f"max residual {res:.2e}, dissipation {diss:.4f} <= |u0|^2 "
        f"{l2[0]:.4f}, monotone={mono}")


def check_pointwise_divergence(cfg):
    V, Q, result, marks = _short_run(cfg)
    B = assemble_divergence(V, Q)
    rule = quadrature(2 * V.degree)
    worst = 0.0
    for n in marks:
        u = result.checkpoints[n]
        alg = np.linalg.norm(B @ u.coeffs) / max(
            np.linalg.norm(u.coeffs), 1e-30)
        point = np.abs(divergence_values(u, rule)).max()
        grad = h1_seminorm(u)
        worst = max(worst, alg / 1e-10, point / (1e-9 * grad))
    return CheckResult("pointwise-divergence", worst <= 1.0,
                       f"max normalized divergence = {worst:.2e} (<= 1)")


def check_infsup(cfg, pairs=None):
    pairs = pairs or [("alfeld", 2, (4, 8))]
    details = []
    ok = True
    for kind, k, (n1, n2) in pairs:
        betas = []
        for n in (n1, n2):
            V, Q = _spaces(n, k) if kind == "alfeld" else _plain_spaces(n, k)
            betas.append(infsup_constant(V, Q))
        drift = abs(betas[1] - betas[0]) / betas[0]
        ok = ok and betas[0] > 0.05 and betas[1] > 0.05 and drift <= 0.25
        details.append(f"{kind}-k{k}: beta=({betas[0]:.4f}, {betas[1]:.4f}) "
                       f"drift {100 * drift:.1f}%")
    return CheckResult("infsup-robustness", ok, "; ".join(details))


def _plain_spaces(n, k):
    mesh = build_structured_mesh(n)
    V = build_velocity_space(mesh, k)
    Q = build_pressure_space(mesh, k - 1)
    return V, Q


def random_stream_field(rng, modes=4):
    """Divergence-free field from a random band-limited stream function.

    Drawing the continuous field first (fixed seed) makes the sample law
    identical on every mesh, so ratio statistics are comparable across
    refinement.
    """
    c = rng.standard_normal((modes, modes))
    m = np.arange(1, modes + 1)

    def fn(pts):
        x = pts[:, 0:1] * m[None, :] * np.pi     # (npts, modes)
        y = pts[:, 1:2] * m[None, :] * np.pi
        sx, cx = np.sin(x), np.cos(x)
        sy, cy = np.sin(y), np.cos(y)
        psi_y = np.einsum("mn,pm,n,pn->p", c, sx, m * np.pi, cy)
        psi_x = np.einsum("mn,pm,m,pn->p", c, cx, m * np.pi, sy)
        return np.column_stack([psi_y, -psi_x])

    return fn


def w14_ratios(V, Q, count, seed):
    """Empirical ratios |grad u|_L4 / (|grad u|_L2^1/2 |A_h u|_L2^1/2)."""
    from .assembly import assemble_load
    rng = np.random.default_rng(seed)
    op = DiscreteStokesOperator(V, Q)
    rule = quadrature(min(20, 4 * V.degree))
    load_rule = quadrature(12)
    geo_w = 2.0 * V.mesh.areas
    ratios = np.empty(count)
    for i in range(count):
        f = assemble_load(V, random_stream_field(rng), load_rule)
        u, _ = op.project(f)
        g = cell_gradients(u, rule)
        gsq = (g**2).sum(axis=(2, 3))
        l4 = np.einsum("q,cq,c->", rule.weights, gsq**2, geo_w) ** 0.25
        l2 = math.sqrt(u.coeffs @ (op.K @ u.coeffs))
        Au = op.apply(u)
        al2 = math.sqrt(Au.coeffs @ (op.M @ Au.coeffs))
        ratios[i] = l4 / math.sqrt(l2 * al2)
    return ratios


def check_w14_inequality(cfg):
    n = cfg["n"]
    k = cfg["k"]
    maxima = []
    for nn in (n, 2 * n):
        V, Q = _spaces(nn, k)
        r = w14_ratios(V, Q, 50, cfg["seed"])
        if not np.all(np.isfinite(r)):
            return CheckResult("w14-inequality", False, "non-finite ratio")
        maxima.append(r.max())
    drift = abs(maxima[1] - maxima[0]) / maxima[0]
    return CheckResult(
        "w14-inequality", drift <= 0.25,
        f"max ratios ({maxima[0]:.4f}, {maxima[1]:.4f}), drift "
        f"{100 * drift:.1f}%")


def check_projection_idempotence(cfg):
    V, Q = _spaces(cfg["n"], cfg["k"])
    field = smooth_curl_field()
    u0, _ = l2_project_divfree(field, V, Q)
    again, _ = l2_project_divfree(u0, V, Q)
    d1 = np.abs(again.coeffs - u0.coeffs).max() / np.abs(u0.coeffs).max()
    r0 = stokes_ritz_project(field, V, Q)
    r1 = stokes_ritz_project(r0, V, Q)
    d2 = np.abs(r1.coeffs - r0.coeffs).max() / np.abs(r0.coeffs).max()
    ok = d1 <= 1e-11 and d2 <= 1e-11
    return CheckResult("projection-idempotence", ok,
                       f"P_Xh drift {d1:.2e}, Ritz drift {d2:.2e}")


def check_backend_agreement(cfg):
    V, Q = _spaces(cfg["n"], cfg["k"])
    field = smooth_curl_field()
    from .assembly import assemble_load
    f = assemble_load(V, field, quadrature(12))
    K = assemble_stiffness(V)
    sols = {}
    for backend in ("direct", "iterative"):
        system = make_system(V, Q, K, f, backend=backend)
        u, p, rep = solve(system)
        sols[backend] = u
    diff = np.linalg.norm(sols["direct"] - sols["iterative"]) / \
        np.linalg.norm(sols["direct"])
    return CheckResult("backend-agreement", diff <= 1e-8,
                       f"relative velocity difference {diff:.2e}")


def check_assembly_determinism(cfg):
    V, Q = _spaces(cfg["n"], cfg["k"])
    rng = np.random.default_rng(cfg["seed"])
    w, _ = l2_project_divfree(
        FEFunction(V, rng.standard_normal(V.num_dofs)), V, Q)
    mats1 = [assemble_mass(V), assemble_stiffness(V),
             assemble_divergence(V, Q), assemble_convection(V, w)]
    mats2 = [assemble_mass(V), assemble_stiffness(V),
             assemble_divergence(V, Q), assemble_convection(V, w)]
    same = all(np.array_equal(a.data, b.data)
               and np.array_equal(a.indices, b.indices)
               and np.array_equal(a.indptr, b.indptr)
               for a, b in zip(mats1, mats2))
    return CheckResult("assembly-determinism", same,
                       "bit-identical CSR arrays across repeated assembly")


def check_dofmap_audit(cfg):
    """Mass pattern must match the pattern predicted by cell-sharing."""
    import scipy.sparse as sp
    V, _ = _spaces(cfg["n"], cfg["k"])
    M = assemble_mass(V)
    dm = V.dofmap
    nloc = dm.basis.dim
    rows = np.repeat(dm.cell_dofs, nloc, axis=1).ravel()
    cols = np.tile(dm.cell_dofs, (1, nloc)).ravel()
    S = dm.ndofs
    pat = sp.coo_matrix(
        (np.ones(rows.size * 2),
         (np.concatenate([rows, rows + S]), np.concatenate([cols, cols + S]))),
        shape=(2 * S, 2 * S)).tocsr()
    pat.sum_duplicates()
    pat.sort_indices()
    Mb = M.copy()
    Mb.data = np.ones_like(Mb.data)
    same = (np.array_equal(pat.indices, Mb.indices)
            and np.array_equal(pat.indptr, Mb.indptr))
    return CheckResult("dofmap-audit", same,
                       "mass pattern equals shared-DOF adjacency pattern")


FAST_CHECKS = [
    check_mesh_conformity,
    check_quadrature_exactness,
    check_divergence_inclusion,
    check_skew_convection,
    check_graded_grids,
    check_energy_ledger,
    check_pointwise_divergence,
    check_infsup,
    check_w14_inequality,
    check_projection_idempotence,
    check_backend_agreement,
    check_assembly_determinism,
    check_dofmap_audit,
]


def run_suite(fast=True, seed=0, stream=None, n=4, k=2):
    """Run the property suite; returns the number of failures."""
    import sys
    stream = stream or sys.stdout
    cfg = {"n": n, "k": k, "seed": seed}
    failures = 0
    for check in FAST_CHECKS:
        if check is check_infsup and not fast:
            result = check(cfg, pairs=[("plain", 4, (2, 4)),
                                       ("alfeld", 2, (4, 8))])
        else:
            result = check(cfg)
        status = "PASS" if result.passed else "FAIL"
        stream.write(f"{status} {result.name}: {result.detail}\n")
        failures += 0 if result.passed else 1
    return failures
