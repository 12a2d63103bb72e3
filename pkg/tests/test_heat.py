import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridcd import graph as G
from hybridcd.heat import (
    CFLError,
    GaussianMixtureSolution,
    GridState,
    MixtureTerm,
    SimulationConfig,
    convergence_table,
    exact_derivs,
    grid_from_solution,
    grid_log_residual,
    log_evolution_residual,
    random_mixture,
    simulate,
    total_mass,
)


def fd_oracle(sol, t, x, i, e=1e-4):
    """Central differences of the value function: gradient, Hessian, time derivative."""
    n = sol.n
    x = np.asarray(x, dtype=float)
    val = lambda tt, xx: sol.value(tt, xx[None, :])[0, i]
    E = np.eye(n) * e
    grad = np.array([(val(t, x + E[k]) - val(t, x - E[k])) / (2 * e) for k in range(n)])
    hess = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            hess[a, b] = (
                val(t, x + E[a] + E[b]) - val(t, x + E[a] - E[b]) - val(t, x - E[a] + E[b]) + val(t, x - E[a] - E[b])
            ) / (4 * e * e)
    dt = (val(t + e, x) - val(t - e, x)) / (2 * e)
    return grad, hess, dt


@given(st.integers(0, 10_000), st.sampled_from([1, 2]), st.floats(0.2, 3.0))
def test_exact_derivatives_against_finite_differences(seed, n, t):
    rng = np.random.default_rng(seed)
    g = G.square()
    sol = random_mixture(g, n, rng)
    x = rng.uniform(-2, 2, n)
    y = g.vertices[seed % 4]
    b = exact_derivs(sol, t, x, y)
    grad, hess, dt = fd_oracle(sol, t, x, seed % 4)
    scale = 1 + abs(b.u)
    assert np.allclose(b.grad_u, grad, atol=1e-7 * scale)
    assert np.allclose(b.hess_u, hess, atol=1e-5 * scale)
    assert b.dt_u == pytest.approx(dt, abs=1e-7 * scale)
    assert b.lap_u == pytest.approx(np.trace(b.hess_u), abs=1e-12 * scale)


def test_grad_laplacian_against_finite_differences():
    rng = np.random.default_rng(2)
    sol = random_mixture(G.two_point(), 2, rng)
    x = np.array([0.3, -0.4])
    e = 1e-5
    b = exact_derivs(sol, 0.8, x, "y1")
    fd = [
        (exact_derivs(sol, 0.8, x + e * np.eye(2)[k], "y1").lap_u - exact_derivs(sol, 0.8, x - e * np.eye(2)[k], "y1").lap_u)
        / (2 * e)
        for k in range(2)
    ]
    assert np.allclose(b.grad_lap_u, fd, atol=1e-8)


def test_heat_kernel_value():
    sol = GaussianMixtureSolution(G.two_point(), 1, [MixtureTerm(1.0, (0.0,), 0.0, (1.0, 1.0))])
    assert sol.value(1.0, [[0.0]])[0, 0] == pytest.approx((4 * np.pi) ** -0.5)
    # the discrete factor of a constant profile is constant
    assert np.ptp(sol.value(0.3, [[1.2]])) == 0.0


def test_domain_errors():
    g = G.two_point()
    with pytest.raises(ValueError):
        GaussianMixtureSolution(g, 1, [MixtureTerm(1.0, (0.0,), -0.1, (1.0, 1.0))])
    with pytest.raises(ValueError):
        GaussianMixtureSolution(g, 1, [MixtureTerm(1.0, (0.0,), 0.1, (0.0, 0.0))])
    with pytest.raises(ValueError):
        GaussianMixtureSolution(g, 2, [MixtureTerm(1.0, (0.0,), 0.1, (1.0, 0.0))])
    disc = G.WeightedGraph(["a", "b"], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        GaussianMixtureSolution(disc, 1, [MixtureTerm(1.0, (0.0,), 0.1, (1.0, 0.0))])
    sol = GaussianMixtureSolution(g, 1, [MixtureTerm(1.0, (0.0,), 0.0, (1.0, 0.0))])
    with pytest.raises(ValueError):
        sol.evaluate(0.0, [[0.0]])
    with pytest.raises(ValueError):
        sol.evaluate(-1.0, [[0.0]])


def test_far_tail_does_not_underflow():
    sol = GaussianMixtureSolution(G.two_point(), 1, [MixtureTerm(1.0, (0.0,), 0.0, (1.0, 0.3))])
    lu = sol.log_value(0.1, [[40.0]])
    assert np.all(np.isfinite(lu))
    assert lu[0, 0] == pytest.approx(-0.5 * np.log(0.4 * np.pi) - 1600 / 0.4 + np.log(sol.graph.heat_matrix(0.1)[0] @ [1, 0.3]))


def test_roundtrip_dict():
    rng = np.random.default_rng(0)
    sol = random_mixture(G.square(), 2, rng)
    again = GaussianMixtureSolution.from_dict(G.square(), sol.to_dict())
    X = rng.uniform(-1, 1, (5, 2))
    assert np.array_equal(sol.value(0.5, X), again.value(0.5, X))


@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_log_evolution_identity_exact(seed, n):
    rng = np.random.default_rng(seed)
    g = [G.two_point(), G.square(), G.complete(3)][seed % 3]
    sol = random_mixture(g, n, rng)
    X = rng.uniform(-5, 5, (20, n))
    t = float(np.exp(rng.uniform(np.log(0.05), np.log(10))))
    assert np.max(np.abs(log_evolution_residual(sol, t, X))) <= 1e-8


def test_flat_term_is_pure_graph_flow():
    g = G.two_point()
    sol = GaussianMixtureSolution(g, 1, [MixtureTerm(1.0, (), 0.0, (1.0, 0.0), flat=True)])
    X = np.array([[-3.0], [0.0], [4.0]])
    vals = sol.value(0.5, X)
    assert np.allclose(vals, np.tile(g.heat_matrix(0.5) @ [1.0, 0.0], (3, 1)))
    ev = sol.evaluate(0.5, X)
    assert np.all(ev.grad == 0) and np.all(ev.lap == 0)
    assert np.max(np.abs(log_evolution_residual(sol, 0.5, X))) < 1e-12


def _cfg(h, t_end, box=24.0, n=1, **kw):
    return SimulationConfig(n=n, h=h, box=box, dt=h * h / (2 * n), t_end=t_end, **kw)


def test_cfl_refused_with_admissible_dt():
    sol = GaussianMixtureSolution(G.two_point(), 1, [MixtureTerm(1.0, (0.0,), 0.5, (1.0, 0.2))])
    cfg = SimulationConfig(n=1, h=0.1, box=24.0, dt=0.01, t_end=0.1)
    u0 = grid_from_solution(sol, 0.0, cfg)
    with pytest.raises(CFLError, match="0.005"):
        simulate(sol.graph, cfg, u0)


def test_equilibrium_stays_constant():
    g = G.square()
    cfg = _cfg(0.2, 0.5, box=4.0)
    u0 = GridState(1, 0.2, (-2.0,), g, np.full((20, 4), 3.0), 0.0)
    out = simulate(g, cfg, u0)[-1]
    assert np.allclose(out.values, 3.0, atol=1e-13)
    assert out.time == pytest.approx(0.5)


def test_nonpositive_data_rejected():
    with pytest.raises(ValueError):
        GridState(1, 0.1, (0.0,), G.two_point(), np.zeros((10, 2)), 0.0)


def test_mass_and_positivity():
    rng = np.random.default_rng(1)
    sol = random_mixture(G.square(), 1, rng)
    cfg = _cfg(0.1, 1.0, snapshot_every=40)
    traj = simulate(sol.graph, cfg, grid_from_solution(sol, 0.0, cfg))
    m0 = total_mass(traj[0])
    for s in traj:
        assert np.all(s.values > 0)
        assert abs(total_mass(s) - m0) <= 1e-12 * m0
    assert traj[-1].time == pytest.approx(1.0)


def test_splitting_commutes_with_exact_vertex_flow():
    # x-constant data: the grid step is the identity, the vertex flow is exact
    g = G.complete(3)
    v = np.array([1.0, 0.2, 0.5])
    cfg = _cfg(0.2, 0.7, box=2.0)
    u0 = GridState(1, 0.2, (-1.0,), g, np.tile(v, (10, 1)), 0.0)
    out = simulate(g, cfg, u0)[-1]
    assert np.allclose(out.values, g.heat_matrix(0.7) @ v, atol=1e-13)


def test_second_order_convergence():
    sol = GaussianMixtureSolution(G.two_point(), 1, [MixtureTerm(1.0, (0.0,), 0.5, (1.0, 0.2))])
    rows = convergence_table(sol, 0.0, 0.5, [0.2, 0.1, 0.05], box=24.0)
    orders = [r["order"] for r in rows[1:]]
    assert all(1.9 < o < 2.1 for o in orders)
    # DERIVED: frozen error of the finest level
    assert rows[-1]["error"] == pytest.approx(8.234665052564427e-06, rel=1e-6)


def test_roundoff_floor_flag():
    sol = GaussianMixtureSolution(G.two_point(), 1, [MixtureTerm(1.0, (0.0,), 0.5, (1.0, 1.0))])
    rows = convergence_table(sol, 0.2, 0.2, [0.2, 0.1], box=24.0)
    assert all(r["roundoff_floor"] and r["order"] is None for r in rows)


def test_grid_residual_within_budget_and_second_order():
    sol = GaussianMixtureSolution(G.two_point(), 1, [MixtureTerm(1.0, (0.0,), 0.5, (1.0, 0.2))])
    peaks = []
    for h in (0.2, 0.1, 0.05):
        cfg = SimulationConfig(1, h, 24.0, h * h / 4, 0.6, snapshot_every=1)
        tr = simulate(sol.graph, cfg, grid_from_solution(sol, 0.0, cfg))
        res, budget = grid_log_residual(tr[-3], tr[-2], tr[-1])
        assert np.all(np.abs(res) <= budget)
        inner = np.abs(tr[-2].axes()[0]) < 6
        peaks.append(np.abs(res[inner]).max())
    assert 3.5 < peaks[0] / peaks[1] < 4.5 and 3.5 < peaks[1] / peaks[2] < 4.5
