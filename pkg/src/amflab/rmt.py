"""Deterministic equivalent of the average output SCNR.

Formula sheet (per-symbol data power p = data_power, noise power s2):

    gamma(x) = (|beta0|^2 / s2) (||x||^2 - rho |x^H H x|^2),
    rho      = 1 / (s2 + ||H x||^2),
    x        = x_p + sqrt(p) U s,   E s = 0, Cov s = I, E|s_i|^4 = kappa.

Averaging over payloads:

    E ||x||^2     = N p + tr(Omega),                Omega = x_p x_p^H
    E |x^H H x|^2 = |tr(H Omega)|^2
                    + 2 p Re{ tr(H) conj(tr(H Omega)) }
                    + p   [ tr(H H^H Omega) + tr(H^H H Omega) ]
                    + p^2 [ |tr H|^2 + tr(H H^H)
                            + (kappa - 2) sum_i |(U^H H U)_{ii}|^2 ]

which is exact for any unitary basis U under the symbol-law assumptions
(zero mean, unit variance, zero pseudo-variance, zero third moment).  The
random factor rho concentrates on a deterministic value obtained from the
coupled fixed point below (H = F^H diag(lam) F circulant, D = |lam|^2):

    psi_i     = 1 / (s2 (1 + p D_i t))
    psi_aux   = 1 / (s2 (1 + p sum_i D_i T_ii))
    T         = (Psi^{-1} + s2 psi_aux * (lam a) (lam a)^H)^{-1}
    t         = 1 / (psi_aux^{-1} + s2 sum_i D_i psi_i |a_i|^2)

with a the pilot expressed in the channel's right singular basis (the DFT
domain; a flag keeps the unrotated variant for comparison), and finally

    rho_de    = (1 - N + s2 tr T) / s2
    avg gamma = (|beta0|^2 / s2) (N p + tr Omega - rho_de * E|x^H H x|^2).

``1 - N + s2 tr T`` is a catastrophic cancellation if evaluated literally;
it is computed here as 1 - tr((I + C)^{-1} C) with C = p t D + psi_aux B,
which only combines well-scaled positive quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    NoConvergenceError,
)
from .numerics import TOL, require_finite, unitary_dft
from .signals import Channel, ModulationBasis, Scenario, build_channel

#: Express the pilot in the channel's right singular basis inside the fixed
#: point.  This is the variant consistent with the fixed point's derivation
#: and the one that tracks Monte Carlo on multi-path channels; the unrotated
#: variant coincides with it whenever the channel's singular spectrum is
#: flat (e.g. a single clutter path).
ROTATE_PILOT_DEFAULT = True


def _as_pilot_cov(pilot: np.ndarray, n: int) -> np.ndarray:
    pilot = np.asarray(pilot, dtype=complex)
    if pilot.ndim == 1:
        if pilot.shape != (n,):
            raise DimensionMismatchError(f"pilot must have length {n}")
        return np.outer(pilot, pilot.conj())
    if pilot.shape != (n, n):
        raise DimensionMismatchError(f"pilot covariance must be {n}x{n}")
    return pilot


# ---------------------------------------------------------------------------
# Fixed point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPointSolution:
    """Converged deterministic-equivalent quantities.

    ``shrinkage`` is the stable value of (1 - N + s2 tr T), the s2-scaled
    deterministic equivalent of the inverse total-interference energy.
    """

    resolvent: np.ndarray = field(repr=False)
    diag_weights: np.ndarray = field(repr=False)
    t_scalar: float = 0.0
    psi_scalar: float = 0.0
    resolvent_trace: float = 0.0
    shrinkage: float = 0.0
    residual: float = 0.0
    iterations: int = 0


def _rotated_cov(channel: Channel, pilot_cov: np.ndarray, rotate: bool) -> np.ndarray:
    if not rotate:
        return pilot_cov
    f = unitary_dft(channel.n)
    return f @ pilot_cov @ f.conj().T


def solve_fixed_point(
    channel: Channel,
    pilot_cov: np.ndarray,
    sigma_n2: float,
    data_power: float = 1.0,
    rotate_pilot: bool = ROTATE_PILOT_DEFAULT,
    step_tol: float = TOL.fixed_point_step,
    max_iter: int = 10_000,
    t_init: float = 0.0,
) -> FixedPointSolution:
    """Solve the coupled deterministic-equivalent fixed point.

    Iterates plain sweeps from the scalar start ``t_init`` (zero by
    default; any start converges to the same point), switching to damped
    (convex combination) updates if the step size ever grows, and verifies
    the converged point by independent substitution into all four
    equations.
    """
    n = channel.n
    s2 = float(sigma_n2)
    p = float(data_power)
    pilot_cov = _as_pilot_cov(pilot_cov, n)
    omega = _rotated_cov(channel, pilot_cov, rotate_pilot)
    lam = channel.eigenvalues
    d = np.abs(lam) ** 2
    b = (lam[:, None] * omega) * lam.conj()[None, :]  # Lambda Omega Lambda^H
    omega_diag = np.real(np.diag(omega))

    t = float(t_init)
    t_diag = np.full(n, 1.0 / s2)  # diag of T
    damping = 1.0
    prev_step = np.inf
    resolvent = np.diag(t_diag).astype(complex)
    psi = np.full(n, 1.0 / s2)
    psi_aux = 1.0 / s2
    for it in range(1, max_iter + 1):
        psi = 1.0 / (s2 * (1.0 + p * d * t))
        psi_aux = 1.0 / (s2 * (1.0 + p * float(np.dot(d, t_diag))))
        m = np.diag(1.0 / psi).astype(complex) + s2 * psi_aux * b
        resolvent_new = np.linalg.inv(m)
        t_new = 1.0 / (1.0 / psi_aux + s2 * float(np.dot(d * psi, omega_diag)))
        if damping < 1.0:
            resolvent_new = damping * resolvent_new + (1.0 - damping) * resolvent
            t_new = damping * t_new + (1.0 - damping) * t
        step_t = abs(t_new - t) / max(abs(t_new), 1e-300)
        step_res = np.linalg.norm(resolvent_new - resolvent) / max(
            np.linalg.norm(resolvent_new), 1e-300
        )
        step = max(step_t, step_res)
        if step > prev_step * 1.000001 and damping == 1.0:
            damping = 0.5  # oscillation guard
        prev_step = step
        t = t_new
        resolvent = resolvent_new
        t_diag = np.real(np.diag(resolvent))
        if step <= step_tol:
            break
    else:
        it = max_iter

    # Independent residual check of all four equations.
    psi = 1.0 / (s2 * (1.0 + p * d * t))
    psi_aux_rhs = 1.0 / (s2 * (1.0 + p * float(np.dot(d, t_diag))))
    m = np.diag(1.0 / psi).astype(complex) + s2 * psi_aux_rhs * b
    res_T = np.linalg.norm(resolvent @ m - np.eye(n)) / np.sqrt(n)
    t_rhs = 1.0 / (1.0 / psi_aux_rhs + s2 * float(np.dot(d * psi, omega_diag)))
    res_t = abs(t - t_rhs) / max(abs(t), 1e-300)
    residual = max(res_T, res_t)
    if residual > TOL.fixed_point_residual:
        raise NoConvergenceError("fixed point did not converge", residual, it)

    # Stable shrinkage: 1 - tr((I + C)^{-1} C), C = p t D + psi_aux B.
    cmat = np.diag(p * t * d).astype(complex) + psi_aux_rhs * b
    x = np.linalg.solve(np.eye(n) + cmat, cmat)
    shrinkage = 1.0 - float(np.trace(x).real)
    trace = float(np.trace(resolvent).real)
    require_finite(resolvent, "resolvent")
    return FixedPointSolution(
        resolvent=resolvent,
        diag_weights=psi,
        t_scalar=float(t),
        psi_scalar=float(psi_aux_rhs),
        resolvent_trace=trace,
        shrinkage=shrinkage,
        residual=float(residual),
        iterations=it,
    )


# ---------------------------------------------------------------------------
# Basis shift profiles and payload moments
# ---------------------------------------------------------------------------

def shift_profile(basis: ModulationBasis, k: int) -> np.ndarray:
    """Per-row response of the basis to the k-sample circular shift.

    Entry m is sum_n |v_{m,n}|^2 exp(-2i pi k n / N) with V = U^H F^H, which
    equals conj(diag(U^H J_k U)); each entry is a convex combination of unit
    phasors, so |profile| <= 1 and the squared norm lies in [0, N].
    """
    n = basis.n
    v = basis.matrix.conj().T @ unitary_dft(n).conj().T
    w = np.abs(v) ** 2
    phase = np.exp(-2j * np.pi * (int(k) % n) * np.arange(n) / n)
    return w @ phase


def shift_leakage(basis: ModulationBasis, k: int) -> float:
    """Squared norm of the shift profile: 0 for SC (k != 0), N for OFDM."""
    prof = shift_profile(basis, k)
    return float(np.vdot(prof, prof).real)


def expected_quadratic_moment(
    channel: Channel,
    pilot: np.ndarray,
    basis: ModulationBasis,
    kurtosis: float,
    data_power: float = 1.0,
) -> float:
    """Exact payload average E |x^H H x|^2 for x = pilot + sqrt(p) U s.

    Evaluates the closed quartic expansion from the module formula sheet;
    the diagonal of U^H H U carries all constellation dependence through the
    kurtosis term, and the expression is exact for any unitary basis.
    """
    pilot = np.asarray(pilot, dtype=complex)
    h = channel.matrix
    if pilot.shape != (channel.n,):
        raise DimensionMismatchError("pilot length does not match channel")
    p = float(data_power)
    hp = h @ pilot
    hhp = h.conj().T @ pilot
    a = complex(np.vdot(pilot, hp))          # x_p^H H x_p
    tr_h = complex(np.trace(h))
    linear = float(np.vdot(hhp, hhp).real + np.vdot(hp, hp).real)
    diag_hat = np.einsum("ij,jk,ki->i", basis.matrix.conj().T, h, basis.matrix)
    quart = (
        np.abs(tr_h) ** 2
        + float(np.vdot(h, h).real)          # tr(H H^H)
        + (kurtosis - 2.0) * float(np.sum(np.abs(diag_hat) ** 2))
    )
    return float(
        np.abs(a) ** 2
        + 2.0 * p * (tr_h * a.conjugate()).real
        + p * linear
        + p * p * quart
    )


def clutter_moment_coefficient(
    channel: Channel,
    pilot_cov: np.ndarray,
    basis: ModulationBasis,
    kurtosis: float,
    data_power: float = 1.0,
) -> float:
    """E |x^H H x|^2 written as a function of the pilot covariance.

    Identical to expected_quadratic_moment for rank-one covariances, but
    defined (and differentiable) for any Hermitian argument; pilot-design
    gradients differentiate this form.
    """
    h = channel.matrix
    n = channel.n
    pilot_cov = _as_pilot_cov(pilot_cov, n)
    p = float(data_power)
    tr_homega = complex(np.trace(h @ pilot_cov))
    tr_hh = complex(np.trace(h.conj().T @ pilot_cov))  # = conj for Hermitian cov
    tr_h = complex(np.trace(h))
    hhh = h @ h.conj().T
    hhh2 = h.conj().T @ h
    linear = float(np.trace(hhh @ pilot_cov).real + np.trace(hhh2 @ pilot_cov).real)
    diag_hat = np.einsum("ij,jk,ki->i", basis.matrix.conj().T, h, basis.matrix)
    quart = (
        np.abs(tr_h) ** 2
        + float(np.vdot(h, h).real)
        + (kurtosis - 2.0) * float(np.sum(np.abs(diag_hat) ** 2))
    )
    return float(
        (tr_homega * tr_hh).real
        + 2.0 * p * (tr_h * tr_hh).real
        + p * linear
        + p * p * quart
    )


# ---------------------------------------------------------------------------
# Deterministic average SCNR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AvgScnrReport:
    """Deterministic equivalent of the payload-averaged output SCNR."""

    value: float
    upper_bound: float
    clutter_moment: float
    inv_clutter_energy: float
    shift_leakages: np.ndarray
    fixed_point: FixedPointSolution = field(repr=False)


def scnr_upper_bound(scenario: Scenario, pilot_trace: float) -> float:
    """Noise-only ceiling |beta0|^2 (N p + tr Omega) / sigma_n2."""
    scale = np.abs(scenario.beta0) ** 2
    return float(
        scale * (scenario.n * scenario.data_power + pilot_trace) / scenario.sigma_n2
    )


def deterministic_avg_scnr(
    scenario: Scenario,
    basis: ModulationBasis,
    kurtosis: float,
    pilot: np.ndarray,
    channel: Channel | None = None,
    rotate_pilot: bool = ROTATE_PILOT_DEFAULT,
) -> AvgScnrReport:
    """Assemble the deterministic average-SCNR report for a pilot.

    ``pilot`` may be a length-N vector or an N x N Hermitian covariance.
    """
    if channel is None:
        channel = build_channel(scenario)
    n = scenario.n
    pilot = np.asarray(pilot, dtype=complex)
    pilot_cov = _as_pilot_cov(pilot, n)
    if pilot.ndim == 1:
        moment = expected_quadratic_moment(
            channel, pilot, basis, kurtosis, scenario.data_power
        )
    else:
        moment = clutter_moment_coefficient(
            channel, pilot_cov, basis, kurtosis, scenario.data_power
        )
    fp = solve_fixed_point(
        channel,
        pilot_cov,
        scenario.sigma_n2,
        data_power=scenario.data_power,
        rotate_pilot=rotate_pilot,
    )
    s2 = scenario.sigma_n2
    inv_energy = fp.shrinkage / s2
    trace = float(np.trace(pilot_cov).real)
    scale = np.abs(scenario.beta0) ** 2
    value = scale / s2 * (n * scenario.data_power + trace - inv_energy * moment)
    leaks = np.array([shift_leakage(basis, k) for _, k in channel.paths])
    return AvgScnrReport(
        value=float(value),
        upper_bound=scnr_upper_bound(scenario, trace),
        clutter_moment=float(moment),
        inv_clutter_energy=float(inv_energy),
        shift_leakages=leaks,
        fixed_point=fp,
    )
