import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsfem.errors import InvalidStateError
from nsfem.initial_data import initial_data_example1, smooth_curl_field
from nsfem.space import FEFunction
from nsfem.timestepper import (RunOperators, build_graded_grid,
                               read_checkpoint, run, step, write_checkpoint)


def test_grid_example_dimensions():
    grid = build_graded_grid(0.1, 1 / 40, 0.55)
    assert grid.N == 9
    assert abs(grid.times[1] - 0.1 * (1 / 9) ** (20 / 9)) <= 1e-18
    grid.validate()


def test_grid_alpha_sweep():
    for alpha in (0.51, 0.55, 0.75, 0.9):
        grid = build_graded_grid(1.0, 1 / 100, alpha)
        grid.validate()


def test_grid_degenerate_tau_equals_T():
    grid = build_graded_grid(1.0, 1.0, 0.55)
    assert grid.N == math.ceil(1 / (1 - 0.55))
    assert grid.times[0] == 0.0 and grid.times[-1] == 1.0


def test_grid_rejects_bad_alpha():
    for alpha in (0.5, 1.0, 0.2, 1.4):
        with pytest.raises(ValueError):
            build_graded_grid(0.1, 1 / 40, alpha)
    with pytest.raises(ValueError):
        build_graded_grid(0.1, 0.2, 0.55)   # tau > T
    with pytest.raises(ValueError):
        build_graded_grid(-1.0, 0.1, 0.55)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.505, 0.93), st.floats(0.05, 2.0),
       st.integers(1, 400))
def test_grid_invariants_random(alpha, T, denom):
    tau = T / denom
    grid = build_graded_grid(T, tau, alpha)
    grid.validate()
    assert grid.times[0] == 0.0
    assert abs(grid.times[-1] - T) <= 1e-12 * T


def test_grid_step_growth_pattern():
    grid = build_graded_grid(0.1, 1 / 80, 0.55)
    # graded steps grow monotonically until the final closure step
    assert np.all(np.diff(grid.steps[:-1]) > 0)
    assert grid.steps[0] == grid.times[1]


def test_step_zero_state(spaces_k2_alfeld4):
    V, Q = spaces_k2_alfeld4
    u, p, report = step(FEFunction(V), 0.01, 0.05, V, Q)
    assert np.abs(u.coeffs).max() == 0.0
    assert np.abs(p.coeffs).max() == 0.0


def test_step_monotone_l2(spaces_k2_alfeld4):
    from nsfem.projections import l2_project_divfree
    from nsfem.study import l2_norm
    V, Q = spaces_k2_alfeld4
    u0, _ = l2_project_divfree(initial_data_example1(), V, Q)
    u1, _, _ = step(u0, 0.01, 0.05, V, Q)
    assert l2_norm(u1) <= l2_norm(u0)


def test_step_requires_divfree_state(spaces_k2_alfeld4, rng):
    V, Q = spaces_k2_alfeld4
    bad = FEFunction(V, rng.standard_normal(V.num_dofs))
    with pytest.raises(InvalidStateError):
        step(bad, 0.01, 0.05, V, Q)


def test_stokes_limit_matches_independent_assembly(spaces_k2_alfeld4):
    """Convection off: the step equals a hand-built implicit Euler Stokes
    solve."""
    from nsfem.projections import l2_project_divfree
    from nsfem.saddle import SaddleSystem, solve
    V, Q = spaces_k2_alfeld4
    u0, _ = l2_project_divfree(smooth_curl_field(), V, Q)
    tau, mu = 0.02, 0.05
    u1, _, _ = step(u0, tau, mu, V, Q, include_convection=False)
    ops = RunOperators(V, Q)
    A = (ops.M_ff / tau + mu * ops.K_ff).tocsc()
    f = (ops.M @ u0.coeffs)[V.free_dofs] / tau
    ufree, _, _ = solve(SaddleSystem(A=A, B=ops.B_f, f=f,
                                     constraints=Q.constraints))
    got = u1.coeffs[V.free_dofs]
    assert np.abs(got - ufree).max() <= 1e-11 * max(1.0, np.abs(ufree).max())


def test_full_step_matches_dense_oracle(spaces_k2_alfeld4):
    import oracle
    from nsfem.projections import l2_project_divfree
    V, Q = spaces_k2_alfeld4
    u0, _ = l2_project_divfree(smooth_curl_field(), V, Q)
    tau, mu = 0.02, 0.05
    u1, p1, _ = step(u0, tau, mu, V, Q)
    free = V.free_dofs
    A = (oracle.dense_mass(V) / tau + mu * oracle.dense_stiffness(V)
         + oracle.dense_convection(V, u0))[np.ix_(free, free)]
    B = oracle.dense_divergence(V, Q)[:, free]
    f = (oracle.dense_mass(V) @ u0.coeffs)[free] / tau
    uo, po = oracle.dense_saddle_solve(A, B, f, np.zeros(Q.num_dofs),
                                       Q.constraints)
    assert np.abs(u1.coeffs[free] - uo).max() <= \
        1e-10 * max(1.0, np.abs(uo).max())
    assert np.abs(p1.coeffs - po).max() <= 1e-10 * max(1.0, np.abs(po).max())


@pytest.fixture(scope="module")
def example1_run(spaces_k2_alfeld4):
    V, Q = spaces_k2_alfeld4
    grid = build_graded_grid(0.1, 1 / 40, 0.55)
    marks = sorted(set(np.linspace(0, grid.N, 5).astype(int)))
    return V, Q, grid, run(initial_data_example1(), grid, 0.05, V, Q,
                           checkpoints=marks)


def test_run_energy_identity(example1_run):
    V, Q, grid, result = example1_run
    led = result.ledger
    res = led.column("energy_residual")
    tau = led.column("tau")
    u0_sq = led.column("l2_sq")[0]
    assert np.all(np.abs(res[1:]) <= 1e-9 * u0_sq / tau[1:])
    led.validate(0.05)


def test_run_monotone_and_dissipation(example1_run):
    V, Q, grid, result = example1_run
    led = result.ledger
    l2 = led.column("l2_sq")
    assert np.all(np.diff(l2) <= 1e-12 * l2[0])
    diss = 2 * 0.05 * np.sum(led.column("tau")[1:] * led.column("h1_sq")[1:])
    assert diss <= l2[0] + 1e-8


def test_run_smallness_diagnostic(example1_run):
    """Partial dissipation sums shrink with the window (Lemma-style check)."""
    from nsfem.study import diagnostics
    V, Q, grid, result = example1_run
    d = diagnostics(result.ledger, grid)
    S = d["S"]
    assert np.all(np.diff(S) >= 0)
    assert S[1] < 0.25 * S[-1]
    assert S[-1] <= result.ledger.column("l2_sq")[0] / (2 * 0.05) + 1e-8


def test_run_checkpoints(example1_run):
    V, Q, grid, result = example1_run
    assert set(result.checkpoints) == set(
        np.linspace(0, grid.N, 5).astype(int))
    final = result.checkpoints[grid.N]
    assert np.array_equal(final.coeffs, result.final.coeffs)


def test_heavy_dissipation_decay(spaces_k2_alfeld4):
    V, Q = spaces_k2_alfeld4
    grid = build_graded_grid(0.1, 1 / 40, 0.55)
    result = run(initial_data_example1(), grid, 10.0, V, Q)
    l2 = result.ledger.column("l2_sq")
    assert math.sqrt(l2[-1]) < 0.01 * math.sqrt(l2[0])


def test_weighted_increment_stable_under_refinement(spaces_k2_alfeld4):
    V, Q = spaces_k2_alfeld4
    from nsfem.projections import l2_project_divfree
    u0, _ = l2_project_divfree(initial_data_example1(), V, Q)
    maxima = []
    for tau in (1 / 20, 1 / 40):
        grid = build_graded_grid(0.1, tau, 0.55)
        result = run(u0, grid, 0.05, V, Q)
        maxima.append(result.ledger.column("weighted_increment")[1:].max())
    assert maxima[1] <= 2.0 * maxima[0]
    assert maxima[0] <= 2.0 * maxima[1]


def test_failed_run_attaches_partial_ledger(spaces_k2_alfeld4, rng):
    V, Q = spaces_k2_alfeld4
    grid = build_graded_grid(0.1, 1 / 40, 0.55)
    bad = FEFunction(V, rng.standard_normal(V.num_dofs))
    with pytest.raises(InvalidStateError) as excinfo:
        run(bad, grid, 0.05, V, Q)
    assert len(excinfo.value.partial_ledger) >= 1


def test_checkpoint_roundtrip(tmp_path, spaces_k2_alfeld4):
    from nsfem.projections import l2_project_divfree
    V, Q = spaces_k2_alfeld4
    u0, _ = l2_project_divfree(smooth_curl_field(), V, Q)
    path = tmp_path / "state.ckpt"
    write_checkpoint(path, u0, 7, 0.025)
    header, coeffs = read_checkpoint(path)
    assert header["mesh_n"] == 4
    assert header["alfeld"] is True
    assert header["degree"] == 2
    assert header["step"] == 7
    assert header["t"] == 0.025
    assert np.array_equal(coeffs, u0.coeffs)


def test_ledger_csv(tmp_path, example1_run):
    import io
    _, _, _, result = example1_run
    buf = io.StringIO()
    result.ledger.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("step,t,tau,l2_sq")
    assert len(lines) == len(result.ledger) + 1
