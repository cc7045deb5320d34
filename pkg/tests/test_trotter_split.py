import numpy as np
import pytest

from berislab import bulk_ode as bo
from berislab import qtensor as qt
from berislab import spectral2d as sp
from berislab.errors import DomainError
from berislab.flows import builtin_flow
from berislab.initial_data import random_qtensor, uniform_uniaxial
from berislab.trotter_split import (
    PrescribedFlow,
    SplitConfig,
    advection_diffusion_substep,
    direct_solve,
    fitted_slope,
    rate_study,
    reaction_half_flow,
    splitting_solve,
)

TG = PrescribedFlow.from_stationary(builtin_flow("taylor_green"))
ZERO = PrescribedFlow.from_stationary(builtin_flow("zero"))


def test_split_config_validation():
    with pytest.raises(DomainError):
        SplitConfig(n_split=0)
    with pytest.raises(DomainError):
        SplitConfig(n_split=2, T=0)


def test_fitted_slope_of_power_law():
    n = [8, 16, 32, 64]
    assert fitted_slope(n, [3.0 * k**-0.5 for k in n]) == pytest.approx(-0.5, abs=1e-12)


def test_substep_with_zero_flow_is_heat_semigroup():
    grid = sp.Grid(16)
    x, y = grid.coords
    r0 = np.array([np.sin(x), np.cos(2 * y), np.sin(x + y), 0 * x, np.cos(3 * x)])
    out = advection_diffusion_substep(grid, r0, ZERO, 0.0, 0.4, 0.5)
    decay = np.exp(-0.5 * 0.4 * np.array([1.0, 4.0, 2.0, 0.0, 9.0]))
    assert np.abs(out - decay[:, None, None] * r0).max() < 1e-14


def test_substep_rotates_uniform_data_under_rigid_vorticity():
    # uniform R and a flow whose rotation rate is constant in the region: only W R - R W acts
    grid = sp.Grid(16)
    x, y = grid.coords
    w = 0.5  # omega / 2 for a flow with vorticity 1
    u = np.zeros((3, 16, 16))
    grad = np.zeros((3, 3, 16, 16))
    grad[1, 0] = 2 * w * 0.5
    grad[0, 1] = -2 * w * 0.5
    flow = PrescribedFlow(lambda g, t: (u, grad), stationary=True)
    r0 = uniform_uniaxial(grid, 0.6, (1, 0, 0))
    out = advection_diffusion_substep(grid, r0, flow, 0.0, 1.0, 0.1, dt=1e-2)
    angle = 0.5  # directors turn at omega / 2
    expected = uniform_uniaxial(grid, 0.6, (np.cos(angle), np.sin(angle), 0))
    assert np.abs(out - expected).max() < 1e-10


def test_evolution_requires_forward_interval():
    grid = sp.Grid(8)
    with pytest.raises(DomainError):
        advection_diffusion_substep(grid, np.zeros((5, 8, 8)), ZERO, 1.0, 1.0, 0.5)


def test_reaction_half_flow_matches_rk4(params, rng):
    r = 0.3 * rng.standard_normal((5, 8, 8))
    a = reaction_half_flow(r, params, 0.5, 1e-3)
    b = bo.integrate_reaction(r, params, bo.OdeConfig(dt=1e-3, t_end=0.5))
    assert np.abs(a - b).max() < 1e-10


def test_splitting_is_exact_when_parts_commute(params):
    grid = sp.Grid(16)
    q0 = uniform_uniaxial(grid, 0.4, (0, 1, 0))
    split = splitting_solve(grid, q0, ZERO, params, SplitConfig(n_split=2, T=1.0, dt=1e-2))
    direct = direct_solve(grid, q0, ZERO, params, 1.0, 1e-2)
    assert np.abs(split - direct).max() < 1e-10


def test_splitting_reports_each_stage(params):
    grid = sp.Grid(8)
    seen = []
    splitting_solve(grid, np.zeros((5, 8, 8)), ZERO, params, SplitConfig(n_split=3, T=0.3, dt=0.05),
                    on_step=lambda stage, k, q: seen.append((stage, k)))
    assert seen == [(s, k) for k in (1, 2, 3) for s in ("reaction", "evolution")]


def test_sampled_flow_matches_analytic(params):
    grid = sp.Grid(16)
    u, grad = TG(grid, 0.0)
    u2, grad2 = PrescribedFlow.sampled(u)(grid, 0.0)
    assert np.allclose(grad, grad2, atol=1e-12)


def test_small_rate_study(params):
    grid = sp.Grid(16)
    q0 = random_qtensor(grid, np.random.default_rng(3), params)
    study = rate_study(grid, q0, TG, params.with_(eps=0.5), 0.5, [2, 4, 8], dt=1e-2)
    assert all(a > b for a, b in zip(study.h2_error, study.h2_error[1:]))
    assert study.slope <= -0.4
    assert study.reference_ok
    assert study.slope_so_far[0] is None and len(study.rows) == 3
    with pytest.raises(DomainError):
        rate_study(grid, q0, TG, params, 0.5, [4, 2])


def test_inviscid_direct_solve_matches_frozen_flow_transport(params):
    # independent code path: the limit system's Q transport with the flow held fixed
    from berislab.limit_system import LimitState, transport_q_step

    grid = sp.Grid(32)
    q0 = random_qtensor(grid, np.random.default_rng(9), params)
    direct = direct_solve(grid, q0, TG, params.with_(eps=0.0), 0.5, 1e-2)
    x, y = grid.coords
    flow = builtin_flow("taylor_green")
    state = LimitState(grid, flow.vorticity(x, y), np.zeros_like(x), grid.ifft(grid.fft(q0) * grid.dealias_mask))
    for _ in range(50):
        state = transport_q_step(state, params, 0.0, 1e-2)
    assert np.abs(direct - state.R).max() < 1e-6


def constant_rotation_flow(rate):
    """u = 0 with a constant antisymmetric gradient: pure rotation of R at ``rate``."""
    def evaluate(grid, t):
        grad = np.zeros((3, 3, grid.n, grid.n))
        grad[1, 0], grad[0, 1] = rate, -rate
        return np.zeros((3, grid.n, grid.n)), grad

    return PrescribedFlow(evaluate, stationary=True)


def test_rotation_with_diffusion_matches_matrix_exponential():
    from scipy.linalg import expm

    grid = sp.Grid(16)
    x, y = grid.coords
    r_hat = qt.qtensor(0.2, 0.1, -0.05, -0.1, 0.03)
    r0 = r_hat[:, None, None] * np.sin(x + 2 * y)
    out = advection_diffusion_substep(grid, r0, constant_rotation_flow(0.4), 0.0, 1.5, 0.2, dt=1e-2)
    w = np.array([[0, -0.4, 0], [0.4, 0, 0], [0, 0, 0]])
    rot = expm(1.5 * w)
    expected_hat = qt.from_matrix(rot @ qt.to_matrix(r_hat) @ rot.T)
    expected = np.exp(-0.2 * 5 * 1.5) * expected_hat[:, None, None] * np.sin(x + 2 * y)
    assert np.abs(out - expected).max() < 1e-10


def test_substep_does_not_grow_l2(params, rng):
    grid = sp.Grid(32)
    r0 = grid.ifft(grid.fft(random_qtensor(grid, rng, params)) * grid.dealias_mask)
    out = advection_diffusion_substep(grid, r0, TG, 0.0, 0.5, 0.1, dt=1e-2)
    assert sp.l2_norm(grid, out) <= sp.l2_norm(grid, r0) + 1e-10


def test_zero_bulk_splitting_is_the_substep(rng):
    grid = sp.Grid(16)
    p = qt.Params(eps=0.3, a=0.0, b=0.0, c=0.0)
    q0 = random_qtensor(grid, rng)
    split = splitting_solve(grid, q0, TG, p, SplitConfig(n_split=1, T=0.5, dt=1e-2))
    sub = advection_diffusion_substep(grid, q0, TG, 0.0, 0.5, 0.3, dt=1e-2)
    assert np.abs(split - sub).max() < 1e-12


def test_zero_flow_splitting_converges(params, rng):
    grid = sp.Grid(16)
    q0 = random_qtensor(grid, rng, params)
    study = rate_study(grid, q0, ZERO, params.with_(eps=0.5), 0.5, [1, 2, 4, 8], dt=1e-2)
    assert all(a > b for a, b in zip(study.h2_error, study.h2_error[1:]))


def test_singleton_rate_study(params, rng):
    grid = sp.Grid(8)
    study = rate_study(grid, random_qtensor(grid, rng, params), TG, params, 0.2, [4], dt=1e-2)
    assert len(study.rows) == 1 and study.slope is None and study.log2_ratios == []
