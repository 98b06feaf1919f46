"""Norms, cross-mesh errors, rate fitting and the convergence studies.

Studies compare end-time velocities against a same-method reference (finer
stepsize or finer mesh) and report two rates: the log-log least-squares
slope over all rows and the last-interval ratio.  Acceptance thresholds use
the last interval, which is closest to the asymptotic regime.
"""

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .assembly import _tabulate, cell_geometry
from .element import quadrature
from .errors import IncompatibleMeshError
from .space import FEFunction, evaluate_many
from .timestepper import build_graded_grid, run


def _norm_rule(space, order=1):
    # exactness 2k integrates |u_h|^2 exactly; 2(k-1) suffices for gradients
    return quadrature(max(1, 2 * space.degree * order - 2 * (order - 1)))


def cell_values(u, rule):
    """Velocity values at the rule's points of every cell; (nc, nq, 2)."""
    V = u.space
    vals, _ = _tabulate(V.dofmap.basis, rule)
    dofs = V.dofmap.cell_dofs
    cx, cy = u.components()
    ux = np.einsum("ci,qi->cq", cx[dofs], vals)
    uy = np.einsum("ci,qi->cq", cy[dofs], vals)
    return np.stack([ux, uy], axis=2)


def cell_gradients(u, rule):
    """Velocity gradients du_i/dx_j at rule points; (nc, nq, 2, 2)."""
    V = u.space
    geo = cell_geometry(V.mesh)
    _, gref = _tabulate(V.dofmap.basis, rule)
    grad = np.einsum("cab,qib->cqia", geo.invJT, gref)
    dofs = V.dofmap.cell_dofs
    cx, cy = u.components()
    gx = np.einsum("ci,cqia->cqa", cx[dofs], grad)
    gy = np.einsum("ci,cqia->cqa", cy[dofs], grad)
    return np.stack([gx, gy], axis=2)


def l2_norm(f, rule=None):
    """L2 norm, quadrature-exact for FE integrands."""
    if f.space.kind == "pressure":
        # orthonormal modal basis: cell mass is |det J| * identity
        w = np.repeat(2.0 * f.space.mesh.areas, f.space.block_size)
        return float(np.sqrt(np.sum(w * f.coeffs**2)))
    rule = rule or _norm_rule(f.space)
    geo = cell_geometry(f.space.mesh)
    v = cell_values(f, rule)
    total = np.einsum("q,cq,c->", rule.weights, (v**2).sum(axis=2), geo.detJ)
    return float(np.sqrt(total))


def h1_seminorm(f, rule=None):
    """H1 seminorm |grad f|_L2 of a velocity."""
    rule = rule or _norm_rule(f.space)
    geo = cell_geometry(f.space.mesh)
    g = cell_gradients(f, rule)
    total = np.einsum("q,cq,c->", rule.weights,
                      (g**2).sum(axis=(2, 3)), geo.detJ)
    return float(np.sqrt(total))


def l2_error_field(u, exact, rule=None):
    """L2 distance between an FE velocity and an analytic field."""
    rule = rule or quadrature(min(20, 2 * u.space.degree + 6))
    geo = cell_geometry(u.space.mesh)
    v = cell_values(u, rule)
    pts = geo.physical_points(rule.points)
    ve = np.asarray(exact(pts.reshape(-1, 2))).reshape(v.shape)
    total = np.einsum("q,cq,c->", rule.weights,
                      ((v - ve)**2).sum(axis=2), geo.detJ)
    return float(np.sqrt(total))


def h1_error_field(u, exact_gradient, rule=None):
    """H1-seminorm distance to an analytic gradient (m,2,2 -> du_i/dx_j)."""
    rule = rule or quadrature(min(20, 2 * u.space.degree + 6))
    geo = cell_geometry(u.space.mesh)
    g = cell_gradients(u, rule)
    pts = geo.physical_points(rule.points)
    ge = np.asarray(exact_gradient(pts.reshape(-1, 2))).reshape(g.shape)
    total = np.einsum("q,cq,c->", rule.weights,
                      ((g - ge)**2).sum(axis=(2, 3)), geo.detJ)
    return float(np.sqrt(total))


def _family(mesh):
    prov = mesh.provenance
    alfeld = prov[0] == "alfeld"
    inner = prov[1] if alfeld else prov
    if isinstance(inner, tuple) and inner and inner[0] == "structured":
        return ("alfeld" if alfeld else "plain", inner[1])
    return None


def _check_nested(coarse, fine):
    if coarse is fine:
        return
    m = fine
    while m is not None:
        if m is coarse:
            return
        m = m.parent
    fc, ff = _family(coarse), _family(fine)
    if fc is not None and ff is not None and fc[0] == ff[0] \
            and ff[1] % fc[1] == 0:
        return
    raise IncompatibleMeshError(
        "meshes are neither identical, parent-linked, nor members of one "
        "structured family")


def l2_error_cross(f_a, f_b):
    """L2 distance between FE velocities on nested (or identical) meshes.

    Integration uses the finer mesh's quadrature; the coarser function is
    evaluated through point location, so the value is symmetric in the
    arguments.
    """
    if f_a.space.mesh.num_cells < f_b.space.mesh.num_cells:
        coarse, fine = f_a, f_b
    else:
        coarse, fine = f_b, f_a
    _check_nested(coarse.space.mesh, fine.space.mesh)
    if coarse.space.mesh is fine.space.mesh:
        if coarse.space.num_dofs == fine.space.num_dofs:
            diff = FEFunction(fine.space, fine.coeffs - coarse.coeffs)
            return l2_norm(diff)
    rule = _norm_rule(fine.space)
    geo = cell_geometry(fine.space.mesh)
    vf = cell_values(fine, rule)
    pts = geo.physical_points(rule.points)
    vc = evaluate_many(coarse, pts.reshape(-1, 2)).reshape(vf.shape)
    total = np.einsum("q,cq,c->", rule.weights,
                      ((vf - vc)**2).sum(axis=2), geo.detJ)
    return float(np.sqrt(total))


def fit_rate(pairs):
    """Least-squares slope of log(error) against log(resolution)."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (resolution, error) pairs")
    res = np.array([float(r) for r, _ in pairs])
    err = np.array([float(e) for _, e in pairs])
    if np.any(err <= 0) or np.any(res <= 0):
        raise ValueError("resolutions and errors must be positive")
    slope, _ = np.polyfit(np.log(res), np.log(err), 1)
    return float(slope)


def fit_rate_last(pairs):
    """Rate over the finest interval: log(e1/e2) / log(r1/r2)."""
    pairs = sorted(pairs, key=lambda p: -float(p[0]))
    (r1, e1), (r2, e2) = pairs[-2], pairs[-1]
    if e1 <= 0 or e2 <= 0:
        raise ValueError("errors must be positive")
    return float(np.log(e1 / e2) / np.log(float(r1) / float(r2)))


@dataclass
class StudyReport:
    kind: str
    config: dict
    rows: list                       # [(label, error)]
    rate_ls: float
    rate_last: float
    ledgers: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        for key in sorted(self.config):
            buf.write(f"# {key}={self.config[key]}\n")
        buf.write("label,error\n")
        for label, err in self.rows:
            buf.write(f"{label},{err!r}\n")
        buf.write(f"rate_ls,{self.rate_ls!r}\n")
        buf.write(f"rate_last,{self.rate_last!r}\n")
        return buf.getvalue()

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def _label(value):
    frac = Fraction(value).limit_denominator(10**9)
    return f"{frac.numerator}/{frac.denominator}" \
        if frac.denominator != 1 else str(frac.numerator)


def _rates(pairs):
    """Both rate definitions; NaN when undefined (a zero row from a
    degenerate reference, or fewer than two rows)."""
    if len(pairs) < 2 or any(e <= 0 for _, e in pairs):
        return float("nan"), float("nan")
    return fit_rate(pairs), fit_rate_last(pairs)


def _run_final(initial_u0, T, tau, alpha, mu, V, Q, backend, rtol):
    grid = build_graded_grid(T, float(tau), alpha)
    result = run(initial_u0, grid, mu, V, Q, backend=backend, rtol=rtol)
    return result


def run_time_study(initial, V, Q, taus, tau_ref, T=0.1, mu=0.05, alpha=0.55,
                   backend="direct", rtol=1e-10, jobs=1, config_extra=None):
    """Time-discretization errors on a fixed mesh.

    All stepsizes (including the reference) start from the same discrete
    initial datum; errors are |u_tau^N - u_ref^N| in L2 at t = T.
    """
    from .projections import l2_project_divfree
    if isinstance(initial, FEFunction):
        u0 = initial
    else:
        u0, _ = l2_project_divfree(initial, V, Q, backend=backend)
    taus = sorted(taus, key=float, reverse=True)    # rows coarse to fine
    all_taus = list(taus) + [tau_ref]

    def job(tau):
        return _run_final(u0, T, tau, alpha, mu, V, Q, backend, rtol)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, all_taus))
    else:
        results = [job(t) for t in all_taus]
    ref = results[-1]
    rows = []
    ledgers = {}
    for tau, res in zip(taus, results[:-1]):
        err = l2_error_cross(res.final, ref.final)
        rows.append((_label(tau), err))
        ledgers[_label(tau)] = res.ledger
    ledgers["ref"] = ref.ledger
    pairs = [(float(t), e) for t, (_, e) in zip(taus, rows)]
    config = {"kind": "time", "T": T, "mu": mu, "alpha": alpha,
              "k": V.degree, "element": _element_name(V),
              "mesh": _mesh_name(V.mesh), "tau_ref": _label(tau_ref)}
    config.update(config_extra or {})
    rate_ls, rate_last = _rates(pairs)
    return StudyReport("time", config, rows, rate_ls, rate_last,
                       ledgers=ledgers)


def run_space_study(initial, build_spaces, ns, n_ref, tau, T=0.1, mu=0.05,
                    alpha=0.55, backend="direct", rtol=1e-10, jobs=1,
                    config_extra=None):
    """Space-discretization errors at a fixed stepsize.

    ``build_spaces(n) -> (V, Q)`` constructs the pair on the mesh with n
    subdivisions per side; ``initial`` is projected independently per mesh
    with the fixed singular-data rule, so every resolution sees the same
    recipe.
    """
    from .projections import l2_project_divfree
    ns = sorted(ns)                                 # rows coarse to fine
    all_ns = list(ns) + [n_ref]

    def job(n):
        V, Q = build_spaces(n)
        u0, _ = l2_project_divfree(initial, V, Q, backend=backend)
        return _run_final(u0, T, tau, alpha, mu, V, Q, backend, rtol)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, all_ns))
    else:
        results = [job(n) for n in all_ns]
    ref = results[-1]
    rows = []
    ledgers = {}
    for n, res in zip(ns, results[:-1]):
        err = l2_error_cross(res.final, ref.final)
        rows.append((_label(Fraction(1, n)), err))
        ledgers[f"1/{n}"] = res.ledger
    ledgers["ref"] = ref.ledger
    pairs = [(1.0 / n, e) for n, (_, e) in zip(ns, rows)]
    config = {"kind": "space", "T": T, "mu": mu, "alpha": alpha,
              "tau": _label(tau), "h_ref": f"1/{n_ref}"}
    config.update(config_extra or {})
    rate_ls, rate_last = _rates(pairs)
    return StudyReport("space", config, rows, rate_ls, rate_last,
                       ledgers=ledgers)


def diagnostics(ledger, grid, errors=None):
    """Runtime regularity monitors derived from a completed ledger.

    Columns: cumulative dissipation integral S(m) = sum tau_n |grad u^n|^2,
    the weighted gradient t^{1/2} |grad u|, the weighted increment
    t |du/tau|, and optionally the weighted error series t_n * e_n.
    """
    t = ledger.column("t")
    h1 = ledger.column("h1_sq")
    tau = ledger.column("tau")
    S = np.concatenate([[0.0], np.cumsum(tau[1:] * h1[1:])])
    out = {
        "t": t,
        "S": S,
        "weighted_h1": ledger.column("weighted_h1"),
        "weighted_increment": ledger.column("weighted_increment"),
    }
    if errors is not None:
        out["weighted_error"] = t * np.asarray(errors)
    return out


def _element_name(V):
    return f"P{V.degree}/P{V.degree - 1}disc" + \
        ("(alfeld)" if V.mesh.is_alfeld else "")


def _mesh_name(mesh):
    fam = _family(mesh)
    if fam is None:
        return f"custom({mesh.num_cells} cells)"
    kind, n = fam
    return f"{kind}-n{n}"
