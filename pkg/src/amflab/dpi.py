"""Payload-independent pilot design on the rank-one covariance manifold.

Maximizes the deterministic average SCNR over Omega = x_p x_p^H with
tr(Omega) <= P_p N by projected Riemannian ascent: the Euclidean gradient
combines the closed-form derivative of the payload moment with the implicit
derivative of the fixed-point resolvent trace, the ascent direction is
projected onto the rank-one tangent space, and an Armijo backtracking step
is retracted back to the feasible set (trace cap followed by dominant
eigenpair truncation, which restores the rank-one factorization the
gradient computation needs).

Gradient convention: for a real objective f of a Hermitian argument, the
gradient G is the Hermitian matrix with df = tr(G dOmega) along Hermitian
directions dOmega.  All finite-difference checks in the tests use exactly
this pairing.

The per-entry derivative system of the resolvent trace is linear in two
scalars once the base fixed point is known, so the full N x N gradient is
assembled in closed form from a handful of matrix products; no iterative
derivative solves are involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    ZeroMatrixError,
)
from .numerics import dominant_eigenpair, unitary_dft
from .signals import Channel, ModulationBasis, Scenario, allone_pilot, build_channel, chirp_pilot
from .rmt import (
    ROTATE_PILOT_DEFAULT,
    AvgScnrReport,
    FixedPointSolution,
    deterministic_avg_scnr,
    solve_fixed_point,
)


def moment_gradient(channel: Channel, pilot_cov: np.ndarray, data_power: float = 1.0) -> np.ndarray:
    """Gradient of the payload moment E|x^H H x|^2 in the pilot covariance.

    d moment = tr(G dOmega) with
    G = tr(H Omega) H^H + tr(H^H Omega) H + p (H H^H + H^H H)
        + p (tr(H) H^H + tr(H^H) H).
    """
    h = channel.matrix
    p = float(data_power)
    tr_homega = complex(np.trace(h @ pilot_cov))
    tr_h = complex(np.trace(h))
    g = (
        tr_homega * h.conj().T
        + tr_homega.conjugate() * h
        + p * (h @ h.conj().T + h.conj().T @ h)
        + p * (tr_h * h.conj().T + tr_h.conjugate() * h)
    )
    return g


def trace_gradient(
    channel: Channel,
    pilot_cov: np.ndarray,
    fp: FixedPointSolution,
    sigma_n2: float,
    data_power: float = 1.0,
    rotate_pilot: bool = ROTATE_PILOT_DEFAULT,
) -> np.ndarray:
    """Gradient of the resolvent trace via implicit differentiation.

    Differentiating the converged fixed point with respect to one covariance
    entry leaves a linear system in two scalars (the trace response and the
    scalar response); its coefficients are shared across entries, so the
    whole matrix is assembled vectorized.  Returned in the original
    (unrotated) covariance coordinates.
    """
    n = channel.n
    s2 = float(sigma_n2)
    p = float(data_power)
    lam = channel.eigenvalues
    d = np.abs(lam) ** 2
    f = unitary_dft(n)
    omega = f @ pilot_cov @ f.conj().T if rotate_pilot else np.asarray(pilot_cov, complex)

    t = fp.t_scalar
    psi = fp.diag_weights
    psi_aux = fp.psi_scalar
    big_t = fp.resolvent
    b = (lam[:, None] * omega) * lam.conj()[None, :]

    tdt = (big_t * d[None, :]) @ big_t                            # T D T
    tbt = big_t @ b @ big_t                                       # T B T
    tt = big_t @ big_t
    g1 = float(np.sum((big_t * big_t.T) * np.outer(d, d)).real)   # tr(D T D T)
    g2 = float(np.trace(d[:, None] * tbt).real)                   # tr(D T B T)
    s_term = float(np.sum(d * d * psi * psi * np.real(np.diag(omega))))
    h1 = float(np.trace(tdt).real)                                # tr(T D T)
    h2 = float(np.trace(tbt).real)                                # tr(T B T)

    # Linear system per probe entry (i, j):
    #   tau (1 - s2^2 p psi_aux^2 g2) + s2 p g1 * t' = rhs1_{ij}
    #   s2 p t^2 * tau + (1 - s2^2 p t^2 s_term) t'  = rhs2_{ij}
    outer = lam.conj()[:, None] * lam[None, :]
    rhs1 = -s2 * psi_aux * outer * tdt
    rhs2 = np.zeros((n, n), dtype=complex)
    np.fill_diagonal(rhs2, -s2 * t * t * d * psi)
    a11 = 1.0 - s2**2 * p * psi_aux**2 * g2
    a12 = s2 * p * g1
    a21 = s2 * p * t * t
    a22 = 1.0 - s2**2 * p * t * t * s_term
    det = a11 * a22 - a12 * a21
    tau = (a22 * rhs1 - a12 * rhs2) / det
    tprime = (a11 * rhs2 - a21 * rhs1) / det

    # tr(T'_{ij}) with psi_aux' = -psi_aux^2 s2 p tau substituted:
    grad = (
        -s2 * p * h1 * tprime
        + s2**2 * p * psi_aux**2 * h2 * tau
        - s2 * psi_aux * outer * tt
    )
    if rotate_pilot:
        grad = f.conj().T @ grad @ f
    return 0.5 * (grad + grad.conj().T)


@dataclass(frozen=True)
class GradientBundle:
    """Euclidean gradient of the average SCNR with its ingredients."""

    gradient: np.ndarray = field(repr=False)
    moment_grad: np.ndarray = field(repr=False)
    trace_grad: np.ndarray = field(repr=False)
    report: AvgScnrReport = field(repr=False)


def avg_scnr_gradient(
    scenario: Scenario,
    basis: ModulationBasis,
    kurtosis: float,
    pilot_cov: np.ndarray,
    channel: Channel | None = None,
    rotate_pilot: bool = ROTATE_PILOT_DEFAULT,
) -> GradientBundle:
    """Gradient of the deterministic average SCNR in the pilot covariance.

    grad = (|beta0|^2 / s2) [ I - rho_de * grad(moment) - moment * grad(tr T) ]
    with rho_de the deterministic inverse-interference-energy factor.
    """
    if channel is None:
        channel = build_channel(scenario)
    report = deterministic_avg_scnr(
        scenario, basis, kurtosis, pilot_cov, channel=channel, rotate_pilot=rotate_pilot
    )
    s2 = scenario.sigma_n2
    mgrad = moment_gradient(channel, pilot_cov, scenario.data_power)
    tgrad = trace_gradient(
        channel, pilot_cov, report.fixed_point, s2, scenario.data_power, rotate_pilot
    )
    scale = np.abs(scenario.beta0) ** 2 / s2
    grad = scale * (
        np.eye(scenario.n)
        - report.inv_clutter_energy * mgrad
        - report.clutter_moment * tgrad
    )
    grad = 0.5 * (grad + grad.conj().T)
    return GradientBundle(gradient=grad, moment_grad=mgrad, trace_grad=tgrad, report=report)


def tangent_project(x: np.ndarray, factor: np.ndarray) -> np.ndarray:
    """Project onto the tangent space of the rank-one manifold at
    Omega = factor factor^H: P(X) = P X + X P - P X P with P the projector
    onto the factor direction."""
    factor = np.asarray(factor, dtype=complex)
    norm = np.linalg.norm(factor)
    if norm < 1e-150:
        raise DegenerateSpectrumError("rank-one factor is numerically zero")
    u = factor / norm
    xu = x @ u
    ux = u.conj() @ x
    px = np.outer(u, ux)
    xp = np.outer(xu, u.conj())
    pxp = np.outer(u, u.conj()) * (u.conj() @ xu)
    return px + xp - pxp


def retract(omega_tilde: np.ndarray, power_budget: float) -> tuple[np.ndarray, np.ndarray]:
    """Map a tangent-space update back to the feasible rank-one set.

    First applies the trace cap (scale to the budget when exceeded), then
    truncates to the dominant eigenpair, which restores Omega = x_p x_p^H;
    a final cap guards the corner case where discarding negative eigenvalues
    raises the trace above the budget.  Returns (Omega, factor).
    """
    omega = 0.5 * (omega_tilde + omega_tilde.conj().T)
    if power_budget <= 0:
        raise DimensionMismatchError("power budget must be positive")
    trace = float(np.trace(omega).real)
    if trace > power_budget:
        omega = omega * (power_budget / trace)
    top, vec = dominant_eigenpair(omega)
    if top <= 0.0:
        raise ZeroMatrixError("no positive eigenvalue to retract onto")
    top = min(top, power_budget)
    factor = np.sqrt(top) * vec
    return np.outer(factor, factor.conj()), factor


@dataclass(frozen=True)
class DpiOptions:
    max_iters: int = 200
    grad_norm_tol: float = 1e-6
    objective_tol: float = 1e-8
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50
    init_factor: np.ndarray | None = None


@dataclass
class DpiState:
    """Result of the payload-averaged pilot optimization.

    ``fallback_allone`` marks the rare exit where the ascent never caught up
    with the all-one baseline and the baseline was returned instead.
    """

    pilot_cov: np.ndarray
    pilot_factor: np.ndarray
    objective_trace: list[float]
    step_trace: list[float]
    grad_norms: list[float]
    iterations: int
    converged: bool
    stalled: bool
    report: AvgScnrReport
    fallback_allone: bool = False


def dpi_optimize(
    scenario: Scenario,
    basis: ModulationBasis,
    kurtosis: float,
    opts: DpiOptions | None = None,
    channel: Channel | None = None,
    rotate_pilot: bool = ROTATE_PILOT_DEFAULT,
) -> DpiState:
    """Riemannian ascent on the rank-one pilot covariance manifold.

    Starts from the quadratic-phase pilot at full budget: the all-one
    baseline is an exact critical point on this manifold (the all-one
    vector is an eigenvector of every circulant channel), so starting there
    freezes the ascent.  Each accepted step satisfies the Armijo
    sufficient-increase condition on the retracted iterate; if no
    backtracked step improves the objective the optimizer stops and flags
    the stall (the expected exit at a boundary optimum, e.g. in clutter-free
    scenarios).  If the ascent ends below the all-one baseline, the baseline
    is returned instead so the result never loses to it.
    """
    opts = opts or DpiOptions()
    if channel is None:
        channel = build_channel(scenario)
    budget = scenario.pilot_budget
    if opts.init_factor is not None:
        factor = np.asarray(opts.init_factor, dtype=complex)
        if factor.shape != (scenario.n,):
            raise DimensionMismatchError("init_factor length does not match scenario")
    else:
        factor = chirp_pilot(scenario.n, scenario.pilot_power)
    omega = np.outer(factor, factor.conj())

    def objective(om: np.ndarray) -> AvgScnrReport:
        return deterministic_avg_scnr(
            scenario, basis, kurtosis, om, channel=channel, rotate_pilot=rotate_pilot
        )

    report = objective(omega)
    trace = [report.value]
    steps: list[float] = []
    gnorms: list[float] = []
    converged = False
    stalled = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        bundle = avg_scnr_gradient(
            scenario, basis, kurtosis, omega, channel=channel, rotate_pilot=rotate_pilot
        )
        g = tangent_project(bundle.gradient, factor)
        gnorm = float(np.linalg.norm(g))
        gnorms.append(gnorm)
        if gnorm <= opts.grad_norm_tol:
            converged = True
            break
        alpha = 1.0 / gnorm
        accepted = False
        for _ in range(opts.max_backtracks):
            cand_omega, cand_factor = retract(omega + alpha * g, budget)
            cand_report = objective(cand_omega)
            if cand_report.value >= trace[-1] + opts.armijo_c * alpha * gnorm**2:
                accepted = True
                break
            alpha *= opts.backtrack
        if not accepted:
            stalled = True
            break
        omega, factor, report = cand_omega, cand_factor, cand_report
        steps.append(alpha)
        trace.append(report.value)
        rel = abs(trace[-1] - trace[-2]) / max(abs(trace[-2]), 1e-300)
        if rel <= opts.objective_tol:
            converged = True
            break

    fallback = False
    baseline_factor = allone_pilot(scenario.n, scenario.pilot_power)
    baseline = objective(np.outer(baseline_factor, baseline_factor.conj()))
    if baseline.value > trace[-1]:
        fallback = True
        factor = baseline_factor
        omega = np.outer(factor, factor.conj())
        report = baseline
        trace = trace + [baseline.value]
    return DpiState(
        pilot_cov=omega,
        pilot_factor=factor,
        objective_trace=trace,
        step_trace=steps,
        grad_norms=gnorms,
        iterations=it,
        converged=converged,
        stalled=stalled,
        report=report,
        fallback_allone=fallback,
    )
