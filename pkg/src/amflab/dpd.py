"""Per-payload (data-payload-dependent) pilot design.

Maximizes the instantaneous output SCNR for one payload realization by
alternating a closed-form auxiliary update with a quadratic pilot
subproblem solved through its KKT conditions:

    maximize   x^H (H x x^H H^H + sigma_n2 I)^{-1} x,   x = x_p + x_d,
    subject to ||x_p||^2 <= P_p N.

The quadratic-transform surrogate 2 Re(u^H x) - u^H (H x x^H H^H +
sigma_n2 I) u is tight at the optimal auxiliary u, so the alternation
ascends the true objective monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    BisectionFailureError,
    DimensionMismatchError,
    ZeroPayloadError,
)
from .numerics import require_hermitian
from .signals import Channel, ModulationBasis, Scenario, allone_pilot, assemble_tx, build_channel
from .amf import instantaneous_scnr


def update_u(x: np.ndarray, h: np.ndarray, sigma_n2: float) -> np.ndarray:
    """Optimal auxiliary u = (H x x^H H^H + sigma_n2 I)^{-1} x, closed form."""
    x = np.asarray(x, dtype=complex)
    hx = h @ x
    denom = sigma_n2 + np.vdot(hx, hx).real
    return (x - hx * (np.vdot(hx, x) / denom)) / sigma_n2


def surrogate_value(
    x_p: np.ndarray, u: np.ndarray, h: np.ndarray, x_d: np.ndarray, sigma_n2: float
) -> float:
    """Direct evaluation of 2 Re(u^H x) - u^H (H x x^H H^H + s2 I) u."""
    x = x_p + x_d
    hx = h @ x
    return float(
        2.0 * np.vdot(u, x).real
        - np.abs(np.vdot(u, hx)) ** 2
        - sigma_n2 * np.vdot(u, u).real
    )


def quadratic_coeffs(
    u: np.ndarray, h: np.ndarray, x_d: np.ndarray, sigma_n2: float
) -> tuple[np.ndarray, np.ndarray, float]:
    """Expand the surrogate in the pilot: F(x_p | u) = 2 Re(c^H x_p) - x_p^H B x_p + C.

    B = H^H u u^H H, c = u - B x_d, and C collects the pilot-free terms
    2 Re(u^H x_d) - x_d^H B x_d - sigma_n2 ||u||^2.  The noise term belongs
    in C so the expansion reproduces the surrogate exactly.
    """
    u = np.asarray(u, dtype=complex)
    x_d = np.asarray(x_d, dtype=complex)
    if u.shape != x_d.shape:
        raise DimensionMismatchError("u and data payload lengths differ")
    g = h.conj().T @ u
    b = np.outer(g, g.conj())
    c = u - g * np.vdot(g, x_d)
    const = float(
        2.0 * np.vdot(u, x_d).real
        - np.abs(np.vdot(g, x_d)) ** 2
        - sigma_n2 * np.vdot(u, u).real
    )
    return c, b, const


@dataclass(frozen=True)
class PilotSolution:
    pilot: np.ndarray = field(repr=False)
    multiplier: float = 0.0
    interior: bool = False
    zero_linear: bool = False


def solve_pilot_subproblem(
    c: np.ndarray,
    b: np.ndarray,
    power_budget: float,
    norm_tol: float = 1e-9,
    max_steps: int = 200,
) -> PilotSolution:
    """Maximize 2 Re(c^H x_p) - x_p^H B x_p subject to ||x_p||^2 <= budget.

    The stationary point is x_p(g) = (B + g I)^{-1} c with multiplier g >= 0
    fixed by complementary slackness; ||x_p(g)||^2 is monotone decreasing in
    g, so the boundary case is solved by bisection on the eigenbasis of B.
    """
    c = np.asarray(c, dtype=complex)
    if power_budget <= 0:
        raise DimensionMismatchError("power budget must be positive")
    cnorm = np.linalg.norm(c)
    if cnorm == 0.0:
        return PilotSolution(pilot=np.zeros_like(c), multiplier=0.0, zero_linear=True)
    require_hermitian(b, tol=1e-10)
    evals, evecs = np.linalg.eigh(b)
    evals = np.maximum(evals, 0.0)  # B is PSD by construction; clip roundoff
    proj = evecs.conj().T @ c
    w2 = np.abs(proj) ** 2

    def norm_sq(g: float) -> float:
        return float(np.sum(w2 / (evals + g) ** 2))

    # Interior optimum: only possible when c lies in the range of B.
    positive = evals > 1e-14 * evals.max() if evals.max() > 0 else evals > 0
    outside = float(np.sum(w2[~positive]))
    if outside <= (1e-14 * cnorm) ** 2 and np.all(positive == (evals > 0)):
        x_int = evecs[:, positive] @ (proj[positive] / evals[positive])
        if np.vdot(x_int, x_int).real <= power_budget:
            return PilotSolution(pilot=x_int, multiplier=0.0, interior=True)

    lo = 1e-12 * max(1.0, float(evals.max()))
    while norm_sq(lo) <= power_budget:
        lo *= 0.5
        if lo < 1e-300:
            # Budget unreachable from above: treat as interior-like solution.
            x_int = evecs @ (proj / np.maximum(evals, 1e-300))
            return PilotSolution(pilot=x_int, multiplier=0.0, interior=True)
    hi = max(1.0, lo * 2.0)
    doublings = 0
    while norm_sq(hi) >= power_budget:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise BisectionFailureError("no upper bracket for the multiplier")
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if norm_sq(mid) >= power_budget:
            lo = mid
        else:
            hi = mid
        if (hi - lo) <= 1e-16 * hi:
            break
    g = 0.5 * (lo + hi)
    x_p = evecs @ (proj / (evals + g))
    achieved = float(np.vdot(x_p, x_p).real)
    if abs(achieved - power_budget) > norm_tol * power_budget:
        raise BisectionFailureError(
            f"budget missed: got {achieved:.6e}, want {power_budget:.6e}"
        )
    return PilotSolution(pilot=x_p, multiplier=float(g))


def dpd_upper_bound(
    x_d: np.ndarray, pilot_power: float, beta0: complex, sigma_n2: float
) -> tuple[float, np.ndarray]:
    """Clutter-free ceiling: pilot collinear with the payload at full budget."""
    x_d = np.asarray(x_d, dtype=complex)
    norm = np.linalg.norm(x_d)
    if norm == 0.0:
        raise ZeroPayloadError("data payload is zero")
    n = x_d.shape[0]
    budget = np.sqrt(pilot_power * n)
    pilot = (budget / norm) * x_d
    gamma = np.abs(beta0) ** 2 / sigma_n2 * (1.0 + budget / norm) ** 2 * norm**2
    return float(gamma), pilot


@dataclass(frozen=True)
class DpdOptions:
    max_iters: int = 100
    objective_tol: float = 1e-8
    norm_tol: float = 1e-9


@dataclass
class DpdState:
    """Result of one per-payload pilot optimization.

    The KKT fields certify the final pilot subproblem: normalized
    stationarity ||(B + g I) x_p - c|| / ||c|| and normalized complementary
    slackness g |(||x_p||^2 - budget)| / (1 + g * budget).
    """

    pilot: np.ndarray
    u: np.ndarray
    objective_trace: list[float]
    multiplier: float
    iterations: int
    converged: bool
    scnr: float
    interior: bool = False
    kkt_stationarity: float = 0.0
    kkt_slackness: float = 0.0


def dpd_optimize(
    scenario: Scenario,
    s_d: np.ndarray,
    basis: ModulationBasis,
    opts: DpdOptions | None = None,
    channel: Channel | None = None,
) -> DpdState:
    """Alternating pilot optimization for one payload realization.

    Starts from the all-one pilot at full budget; every outer iteration is
    an exact ascent step, and the loop stops on a relative objective change
    below ``opts.objective_tol`` or after ``opts.max_iters`` iterations.
    The trace records |beta0|^2-scaled SCNR values so results compare
    directly with bounds and baselines.
    """
    opts = opts or DpdOptions()
    if channel is None:
        channel = build_channel(scenario)
    h = channel.matrix
    s2 = scenario.sigma_n2
    x_d = assemble_tx(
        allone_pilot(scenario.n, scenario.pilot_power), basis, s_d, scenario.data_power
    ).data
    budget = scenario.pilot_budget

    x_p = allone_pilot(scenario.n, scenario.pilot_power)
    gamma = instantaneous_scnr(scenario, x_p + x_d, channel).gamma
    trace = [gamma]
    u = update_u(x_p + x_d, h, s2)
    last_c, last_b, _ = quadratic_coeffs(u, h, x_d, s2)
    multiplier = 0.0
    interior = False
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        u = update_u(x_p + x_d, h, s2)
        last_c, last_b, _ = quadratic_coeffs(u, h, x_d, s2)
        sol = solve_pilot_subproblem(last_c, last_b, budget, norm_tol=opts.norm_tol)
        x_p = sol.pilot
        multiplier = sol.multiplier
        interior = sol.interior
        gamma = instantaneous_scnr(scenario, x_p + x_d, channel).gamma
        trace.append(gamma)
        rel = abs(trace[-1] - trace[-2]) / max(abs(trace[-2]), 1e-300)
        if rel <= opts.objective_tol:
            converged = True
            break

    stat = float(
        np.linalg.norm((last_b + multiplier * np.eye(scenario.n)) @ x_p - last_c)
        / max(np.linalg.norm(last_c), 1e-300)
    )
    energy = float(np.vdot(x_p, x_p).real)
    slack = multiplier * abs(energy - budget) / (1.0 + multiplier * budget)
    return DpdState(
        pilot=x_p,
        u=u,
        objective_trace=trace,
        multiplier=multiplier,
        iterations=it,
        converged=converged,
        scnr=trace[-1],
        interior=interior,
        kkt_stationarity=stat,
        kkt_slackness=float(slack),
    )
