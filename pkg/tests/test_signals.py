import numpy as np
import pytest

from amflab.exceptions import (
    DegenerateDelayError,
    DimensionMismatchError,
    UnsupportedOrderError,
)
from amflab.numerics import stream_rng, unitary_dft
from amflab.signals import (
    ClutterGeometry,
    Scenario,
    allone_pilot,
    assemble_tx,
    build_channel,
    chirp_pilot,
    circulant_eigenvalues,
    dbm_to_mw,
    make_basis,
    make_constellation,
    mw_to_dbm,
    path_gain_variance,
    receive,
    sample_clutter_gains,
    sample_symbols,
    shift_apply,
    shift_matrix,
)


def test_dbm_roundtrip():
    assert dbm_to_mw(-90.0) == pytest.approx(1e-9)
    assert mw_to_dbm(dbm_to_mw(23.5)) == pytest.approx(23.5)


# ---------------------------------------------------------------------------
# Constellations
# ---------------------------------------------------------------------------

def test_psk4_kurtosis_exact():
    c = make_constellation("psk", 4)
    assert c.kurtosis == 1.0
    assert np.allclose(np.abs(c.points), 1.0)


def test_qam16_kurtosis():
    c = make_constellation("qam", 16)
    assert c.kurtosis == pytest.approx(1.32, abs=1e-12)


def test_qam64_kurtosis_matches_alphabet_moment():
    # independent oracle: explicit double loop over the un-normalized grid
    levels = [-7, -5, -3, -1, 1, 3, 5, 7]
    pts = [complex(a, b) for a in levels for b in levels]
    e2 = sum(abs(p) ** 2 for p in pts) / len(pts)
    e4 = sum(abs(p) ** 4 for p in pts) / len(pts)
    expected = e4 / e2**2
    c = make_constellation("qam", 64)
    assert c.kurtosis == pytest.approx(expected, rel=1e-12)


def test_gaussian_kurtosis():
    assert make_constellation("gaussian").kurtosis == 2.0


def test_alphabet_normalization_moments():
    for kind, order in (("psk", 4), ("psk", 8), ("qam", 16), ("qam", 64)):
        c = make_constellation(kind, order)
        assert np.mean(c.points) == pytest.approx(0.0, abs=1e-12)
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, rel=1e-12)
        assert np.mean(c.points**2) == pytest.approx(0.0, abs=1e-12)
        # zero third moment backs the quartic expansion
        assert np.mean(c.points * np.abs(c.points) ** 2) == pytest.approx(0.0, abs=1e-12)


def test_unsupported_orders():
    with pytest.raises(UnsupportedOrderError):
        make_constellation("psk", 2)
    with pytest.raises(UnsupportedOrderError):
        make_constellation("qam", 8)
    with pytest.raises(UnsupportedOrderError):
        make_constellation("weird", 4)


def test_psk_samples_unit_modulus():
    rng = stream_rng(1, 0)
    s = sample_symbols(make_constellation("psk", 4), 4096, rng)
    assert np.all(np.abs(np.abs(s) - 1.0) < 1e-15)


def test_sample_moments_large():
    rng = stream_rng(2, 0)
    n = 1_000_000
    for kind, order in (("psk", 4), ("qam", 16), ("gaussian", 0)):
        c = make_constellation(kind, order)
        s = sample_symbols(c, n, rng)
        se = 1.0 / np.sqrt(n)
        assert abs(np.mean(s)) < 4 * se
        assert abs(np.mean(np.abs(s) ** 2) - 1.0) < 5 * se
        assert abs(np.mean(s**2)) < 5 * se
        kappa_hat = np.mean(np.abs(s) ** 4)
        assert abs(kappa_hat - c.kurtosis) < 0.02


def test_sampling_deterministic():
    c = make_constellation("qam", 16)
    a = sample_symbols(c, 64, stream_rng(5, 9))
    b = sample_symbols(c, 64, stream_rng(5, 9))
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["sc", "ofdm", "afdm"])
@pytest.mark.parametrize("n", [4, 16, 33])
def test_basis_unitarity(kind, n):
    b = make_basis(kind, n)
    gap = np.linalg.norm(b.matrix.conj().T @ b.matrix - np.eye(n))
    assert gap <= 1e-10 * n


def test_sc_basis_is_identity():
    assert np.array_equal(make_basis("sc", 6).matrix, np.eye(6, dtype=complex))


def test_ofdm_basis_is_inverse_dft():
    n = 8
    b = make_basis("ofdm", n)
    np.testing.assert_allclose(b.matrix, unitary_dft(n).conj().T, atol=1e-14)


def test_afdm_default_coefficients():
    b = make_basis("afdm", 16)
    assert b.c1 == pytest.approx(1.0 / 64.0)
    assert b.c2 == pytest.approx(1.0 / 32.0)


def test_custom_basis_validation():
    with pytest.raises(DimensionMismatchError):
        make_basis("custom", 3, matrix=np.ones((3, 3), dtype=complex))
    u = unitary_dft(3)
    b = make_basis("custom", 3, matrix=u)
    assert np.array_equal(b.matrix, u)


# ---------------------------------------------------------------------------
# Shifts
# ---------------------------------------------------------------------------

def test_shift_identity():
    x = np.arange(5).astype(complex)
    assert np.array_equal(shift_apply(0, x), x)


def test_shift_block_structure():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(shift_apply(1, x), [2.0, 3.0, 1.0])


def test_shift_composition():
    rng = stream_rng(3, 1)
    x = rng.standard_normal(11) + 1j * rng.standard_normal(11)
    for a, b in [(2, 5), (7, 9), (10, 10)]:
        lhs = shift_apply(a, shift_apply(b, x))
        rhs = shift_apply((a + b) % 11, x)
        np.testing.assert_allclose(lhs, rhs, atol=1e-15)


def test_shift_bijection():
    rng = stream_rng(3, 2)
    x = rng.standard_normal(9)
    for k in range(9):
        assert np.array_equal(shift_apply((9 - k) % 9, shift_apply(k, x)), x)


def test_shift_matrix_consistency():
    rng = stream_rng(3, 3)
    x = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    for k in (0, 1, 4, 6):
        np.testing.assert_allclose(shift_matrix(k, 7) @ x, shift_apply(k, x), atol=1e-15)
    # unitary and composition J_a J_b = J_{a+b}
    j2, j3 = shift_matrix(2, 7), shift_matrix(3, 7)
    np.testing.assert_allclose(j2 @ j3, shift_matrix(5, 7), atol=1e-15)
    np.testing.assert_allclose(j2.conj().T @ j2, np.eye(7), atol=1e-15)


# ---------------------------------------------------------------------------
# Scenario / channel
# ---------------------------------------------------------------------------

def _scenario(n=8, clutter=((0.5 + 0.1j, 3),), **kw):
    defaults = dict(
        n=n, sigma_n2=1e-9, beta0=1e-5, target_bin=1, clutter=clutter,
        pilot_power=100.0, data_power=1000.0,
    )
    defaults.update(kw)
    return Scenario(**defaults)


def test_scenario_rejects_degenerate_delay():
    with pytest.raises(DegenerateDelayError):
        _scenario(clutter=((1.0, 1),))


def test_scenario_rejects_bad_power():
    with pytest.raises(DimensionMismatchError):
        _scenario(pilot_power=0.0)


def test_scenario_rejects_out_of_range_bin():
    with pytest.raises(DegenerateDelayError):
        _scenario(clutter=((1.0, 8),))


def test_build_channel_empty():
    ch = build_channel(_scenario(clutter=()))
    assert np.all(ch.matrix == 0)
    assert np.all(ch.eigenvalues == 0)


def test_build_channel_single_shift():
    sc = _scenario(n=3, target_bin=0, clutter=((1.0, 1),))
    ch = build_channel(sc)
    np.testing.assert_allclose(ch.matrix, shift_matrix(1, 3), atol=1e-15)


def test_build_channel_eigenvalues_match_dense():
    rng = stream_rng(11, 0)
    n = 16
    clutter = tuple(
        (complex(rng.standard_normal(), rng.standard_normal()), int(b))
        for b in (3, 7, 9, 14)
    )
    sc = _scenario(n=n, target_bin=1, clutter=clutter)
    ch = build_channel(sc)
    lam_dense = circulant_eigenvalues(ch.matrix[:, 0])
    np.testing.assert_allclose(ch.eigenvalues, lam_dense, atol=1e-12)
    # circulant structure: column j is column 0 shifted by j
    for j in range(n):
        np.testing.assert_allclose(ch.matrix[:, j], np.roll(ch.matrix[:, 0], j), atol=1e-15)


def test_build_channel_merges_coincident_offsets():
    sc = _scenario(n=6, target_bin=0, clutter=((1.0, 2), (0.5j, 2)))
    ch = build_channel(sc)
    assert len(ch.paths) == 1
    gain, offset = ch.paths[0]
    assert offset == 2
    assert gain == pytest.approx(1.0 + 0.5j)


# ---------------------------------------------------------------------------
# Clutter gains
# ---------------------------------------------------------------------------

def test_path_gain_variance_formula():
    # independent evaluation of the loss exponent arithmetic
    expected = 10.0 ** (-0.1 * (61.4 + 20.0 * np.log10(30.0)))
    assert path_gain_variance(30.0) == pytest.approx(expected, rel=1e-12)


def test_path_gain_monotone_in_distance():
    dists = [10.0, 30.0, 100.0, 1e4, 1e8]
    vals = [path_gain_variance(d) for d in dists]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_clutter_gain_sample_variance():
    geom = ClutterGeometry(distances=(30.0,) * 1, shadow_sigma_db=0.0)
    rng = stream_rng(21, 0)
    draws = np.array([sample_clutter_gains(geom, rng)[0] for _ in range(100_000)])
    target = path_gain_variance(30.0)
    assert abs(np.mean(np.abs(draws) ** 2) - target) < 0.02 * target


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------

def test_assemble_zero_payload():
    basis = make_basis("ofdm", 4)
    x_p = allone_pilot(4, 2.0)
    frame = assemble_tx(x_p, basis, np.zeros(4), 3.0)
    np.testing.assert_allclose(frame.vector, x_p, atol=1e-15)


def test_assemble_sc_unit_power_is_symbols():
    basis = make_basis("sc", 4)
    s = np.array([1, 1j, -1, -1j], dtype=complex)
    frame = assemble_tx(np.zeros(4), basis, s, 1.0)
    np.testing.assert_allclose(frame.vector, s, atol=1e-15)


def test_assemble_energy_monte_carlo():
    # MC oracle: E ||x||^2 = N P_d + ||x_p||^2
    n, p_d = 16, 3.0
    basis = make_basis("ofdm", n)
    const = make_constellation("qam", 16)
    x_p = chirp_pilot(n, 0.7)
    rng = stream_rng(31, 0)
    vals = np.array([
        np.vdot(f.vector, f.vector).real
        for f in (
            assemble_tx(x_p, basis, sample_symbols(const, n, rng), p_d)
            for _ in range(20_000)
        )
    ])
    expected = n * p_d + np.vdot(x_p, x_p).real
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - expected) < 3 * se


def test_receive_noise_only_covariance():
    sc = _scenario(n=4, clutter=(), sigma_n2=2.0)
    basis = make_basis("sc", 4)
    frame = assemble_tx(np.zeros(4), basis, np.zeros(4), 1.0)
    rng = stream_rng(41, 0)
    draws = np.array([receive(sc, frame, rng) for _ in range(40_000)])
    cov = (draws[:, :, None] * draws[:, None, :].conj()).mean(axis=0)
    assert np.linalg.norm(cov - 2.0 * np.eye(4)) < 0.1


def test_receive_clean_components():
    sc = _scenario(n=6, target_bin=2, clutter=((0.5, 4),), sigma_n2=1e-30)
    basis = make_basis("sc", 6)
    x = np.arange(1, 7).astype(complex)
    frame = assemble_tx(x, basis, np.zeros(6), 1.0)
    y = receive(sc, frame, stream_rng(51, 0))
    expected = sc.beta0 * shift_apply(2, x) + 0.5 * shift_apply(4, x)
    np.testing.assert_allclose(y, expected, atol=1e-12)


def test_receive_deterministic():
    sc = _scenario()
    basis = make_basis("ofdm", 8)
    frame = assemble_tx(
        allone_pilot(8, sc.pilot_power), basis,
        sample_symbols(make_constellation("psk", 4), 8, stream_rng(61, 0)),
        sc.data_power,
    )
    y1 = receive(sc, frame, stream_rng(61, 1))
    y2 = receive(sc, frame, stream_rng(61, 1))
    assert np.array_equal(y1, y2)


def test_chirp_pilot_flat_spectrum():
    n, p = 16, 4.0
    x = chirp_pilot(n, p)
    assert np.allclose(np.abs(x), np.sqrt(p))
    w = np.abs(unitary_dft(n) @ x) ** 2
    assert np.allclose(w, w.mean(), rtol=1e-9)
