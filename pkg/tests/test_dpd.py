import numpy as np
import pytest

from amflab.dpd import (
    DpdOptions,
    dpd_optimize,
    dpd_upper_bound,
    quadratic_coeffs,
    solve_pilot_subproblem,
    surrogate_value,
    update_u,
)
from amflab.exceptions import ZeroPayloadError
from amflab.numerics import hermitian_solve, stream_rng
from amflab.signals import (
    Scenario,
    allone_pilot,
    build_channel,
    make_basis,
    make_constellation,
    path_gain_variance,
    sample_symbols,
)
from amflab.amf import instantaneous_scnr


def _scenario(n=8, clutter=((2e-5 + 1e-5j, 3),), **kw):
    defaults = dict(
        n=n, sigma_n2=1e-9, beta0=1e-5, target_bin=1, clutter=clutter,
        pilot_power=100.0, data_power=1000.0,
    )
    defaults.update(kw)
    return Scenario(**defaults)


def _rand_vec(n, seed):
    rng = stream_rng(seed, 0)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_update_u_zero_channel():
    x = _rand_vec(5, 1)
    u = update_u(x, np.zeros((5, 5), dtype=complex), 0.25)
    np.testing.assert_allclose(u, x / 0.25, rtol=1e-12)


def test_update_u_matches_dense_solve():
    # direct-inverse oracle for the rank-one closed form
    sc = _scenario()
    ch = build_channel(sc)
    x = _rand_vec(8, 2)
    u = update_u(x, ch.matrix, sc.sigma_n2)
    hx = ch.matrix @ x
    m = np.outer(hx, hx.conj()) + sc.sigma_n2 * np.eye(8)
    np.testing.assert_allclose(u, hermitian_solve(m, x), rtol=1e-9)


def test_surrogate_tight_at_optimal_u():
    sc = _scenario(n=8, clutter=((3e-5, 3), (1e-5j, 6)))
    ch = build_channel(sc)
    for seed in range(10):
        x = _rand_vec(8, seed) * 30.0
        u = update_u(x, ch.matrix, sc.sigma_n2)
        hx = ch.matrix @ x
        m = np.outer(hx, hx.conj()) + sc.sigma_n2 * np.eye(8)
        objective = np.vdot(x, hermitian_solve(m, x)).real
        value = surrogate_value(x, u, ch.matrix, np.zeros(8), sc.sigma_n2)
        assert value == pytest.approx(objective, rel=1e-9)


def test_surrogate_rescaled_block_reevaluates_exactly():
    sc = _scenario()
    ch = build_channel(sc)
    x = _rand_vec(8, 3)
    u = update_u(2.0 * x, ch.matrix, sc.sigma_n2)
    hx = ch.matrix @ (2.0 * x)
    m = np.outer(hx, hx.conj()) + sc.sigma_n2 * np.eye(8)
    expected = np.vdot(2.0 * x, hermitian_solve(m, 2.0 * x)).real
    assert surrogate_value(2.0 * x, u, ch.matrix, np.zeros(8), sc.sigma_n2) == pytest.approx(
        expected, rel=1e-9
    )


def test_quadratic_coeffs_zero_u():
    c, b, const = quadratic_coeffs(
        np.zeros(4, dtype=complex), np.eye(4, dtype=complex), _rand_vec(4, 4), 0.5
    )
    assert np.all(c == 0) and np.all(b == 0) and const == 0.0


def test_quadratic_coeffs_zero_channel():
    u = _rand_vec(4, 5)
    x_d = _rand_vec(4, 6)
    s2 = 0.7
    c, b, const = quadratic_coeffs(u, np.zeros((4, 4), dtype=complex), x_d, s2)
    np.testing.assert_allclose(c, u)
    assert np.all(b == 0)
    expected = 2 * np.vdot(u, x_d).real - s2 * np.vdot(u, u).real
    assert const == pytest.approx(expected, rel=1e-12)


def test_quadratic_expansion_matches_surrogate():
    sc = _scenario(n=6, clutter=((4e-5, 2), (2e-5, 5)))
    ch = build_channel(sc)
    x_d = _rand_vec(6, 7) * 20.0
    u = update_u(x_d, ch.matrix, sc.sigma_n2)
    c, b, const = quadratic_coeffs(u, ch.matrix, x_d, sc.sigma_n2)
    for seed in range(20):
        x_p = _rand_vec(6, 100 + seed) * 10.0
        expansion = 2 * np.vdot(c, x_p).real - np.vdot(x_p, b @ x_p).real + const
        direct = surrogate_value(x_p, u, ch.matrix, x_d, sc.sigma_n2)
        assert expansion == pytest.approx(direct, rel=1e-9)


def test_subproblem_zero_quadratic_closed_form():
    c = _rand_vec(6, 8)
    budget = 5.0
    sol = solve_pilot_subproblem(c, np.zeros((6, 6), dtype=complex), budget)
    assert sol.multiplier == pytest.approx(np.linalg.norm(c) / np.sqrt(budget), rel=1e-9)
    np.testing.assert_allclose(
        sol.pilot, np.sqrt(budget) * c / np.linalg.norm(c), rtol=1e-9
    )


def test_subproblem_orthogonal_linear_term_reduces_to_scaling():
    g = _rand_vec(6, 9)
    b = np.outer(g, g.conj())
    c = _rand_vec(6, 10)
    c -= g * (np.vdot(g, c) / np.vdot(g, g))  # orthogonal to range(B)
    budget = 3.0
    sol = solve_pilot_subproblem(c, b, budget)
    np.testing.assert_allclose(
        sol.pilot, np.sqrt(budget) * c / np.linalg.norm(c), rtol=1e-8
    )


def test_subproblem_stationarity_and_budget():
    rng = stream_rng(12, 0)
    for trial in range(20):
        n = 8
        g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        b = np.outer(g, g.conj())
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        budget = 2.0 + 3.0 * rng.random()
        sol = solve_pilot_subproblem(c, b, budget)
        x = sol.pilot
        grad = (b + sol.multiplier * np.eye(n)) @ x - c
        assert np.linalg.norm(grad) <= 1e-8 * np.linalg.norm(c)
        assert np.vdot(x, x).real == pytest.approx(budget, rel=1e-9)
        assert sol.multiplier >= 0.0


def test_subproblem_interior_optimum():
    g = np.array([1.0, 0.0], dtype=complex)
    b = np.outer(g, g.conj()) * 4.0
    c = g * 0.4  # unconstrained optimum has norm 0.1
    sol = solve_pilot_subproblem(c, b, power_budget=5.0)
    assert sol.interior
    assert sol.multiplier == 0.0
    assert np.vdot(sol.pilot, sol.pilot).real <= 5.0


def test_subproblem_zero_linear_term_flag():
    sol = solve_pilot_subproblem(np.zeros(4, dtype=complex), np.eye(4, dtype=complex), 1.0)
    assert sol.zero_linear
    assert np.all(sol.pilot == 0)


def test_upper_bound_values():
    x_d = _rand_vec(8, 13)
    norm2 = np.vdot(x_d, x_d).real
    gamma, pilot = dpd_upper_bound(x_d, 0.0, 1e-5, 1e-9)
    assert gamma == pytest.approx(1e-10 * norm2 / 1e-9, rel=1e-12)
    # ||x_d||^2 = N with unit pilot power: bound is 4 N |beta0|^2 / s2
    x_unit = x_d * np.sqrt(8.0 / norm2)
    gamma2, _ = dpd_upper_bound(x_unit, 1.0, 1e-5, 1e-9)
    assert gamma2 == pytest.approx(1e-10 / 1e-9 * 4.0 * 8.0, rel=1e-12)
    with pytest.raises(ZeroPayloadError):
        dpd_upper_bound(np.zeros(4), 1.0, 1e-5, 1e-9)


def _run_instance(seed, q, n=16):
    rng = stream_rng(seed, 0)
    bins = rng.choice(np.arange(1, n), size=q, replace=False)
    clutter = tuple(
        (np.sqrt(path_gain_variance(30 + 10 * rng.random()) / 2)
         * (rng.standard_normal() + 1j * rng.standard_normal()), int(b))
        for b in bins
    )
    sc = _scenario(n=n, target_bin=0, clutter=clutter,
                   beta0=np.sqrt(path_gain_variance(50.0)))
    basis = make_basis("ofdm", n)
    const = make_constellation("psk", 4)
    s_d = sample_symbols(const, n, rng)
    return sc, basis, s_d


def test_dpd_monotone_and_sandwich():
    for seed in range(8):
        sc, basis, s_d = _run_instance(seed, q=1 + seed % 4)
        ch = build_channel(sc)
        state = dpd_optimize(sc, s_d, basis, channel=ch)
        trace = np.array(state.objective_trace)
        assert np.all(np.diff(trace) >= -1e-12 * np.abs(trace[:-1]))
        # termination contract: the 1e-8 relative-change exit or the
        # 100-iteration cap, whichever comes first
        assert state.iterations <= 100
        x_d = np.sqrt(sc.data_power) * (basis.matrix @ s_d)
        allone = instantaneous_scnr(
            sc, allone_pilot(sc.n, sc.pilot_power) + x_d, ch
        ).gamma
        ub, _ = dpd_upper_bound(x_d, sc.pilot_power, sc.beta0, sc.sigma_n2)
        assert allone <= state.scnr * (1 + 1e-9)
        assert state.scnr <= ub * (1 + 1e-9)
        assert state.kkt_stationarity <= 1e-8
        assert state.kkt_slackness <= 1e-8
        if not state.interior:
            energy = np.vdot(state.pilot, state.pilot).real
            assert energy == pytest.approx(sc.pilot_budget, rel=1e-9)


def test_dpd_clutter_free_pilot_collinear_with_payload():
    sc = _scenario(n=8, clutter=(), beta0=1e-5)
    basis = make_basis("ofdm", 8)
    s_d = sample_symbols(make_constellation("psk", 4), 8, stream_rng(17, 0))
    state = dpd_optimize(sc, s_d, basis, opts=DpdOptions(objective_tol=1e-14))
    x_d = np.sqrt(sc.data_power) * (basis.matrix @ s_d)
    cos = abs(np.vdot(state.pilot, x_d)) / (
        np.linalg.norm(state.pilot) * np.linalg.norm(x_d)
    )
    assert cos == pytest.approx(1.0, abs=1e-6)
    assert np.vdot(state.pilot, state.pilot).real == pytest.approx(
        sc.pilot_budget, rel=1e-9
    )


def test_dpd_deterministic_rerun():
    sc, basis, s_d = _run_instance(23, q=2)
    a = dpd_optimize(sc, s_d, basis)
    b = dpd_optimize(sc, s_d, basis)
    assert a.objective_trace == b.objective_trace
    assert np.array_equal(a.pilot, b.pilot)
