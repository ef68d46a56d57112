"""Adaptive matched filter: MVDR weights, output SCNR in direct and
rank-one (Sherman-Morrison) form, the conventional matched-filter baseline,
and range profiles.

The per-block covariance is R = c c^H + sigma_n2 I with c the clutter
response to the transmitted block, so every inverse here is a rank-one
update of a scaled identity and is applied in closed form.

Range profiles plot the whitened-correlator output |(R^{-1} J_n x)^H y|^2
per delay hypothesis n (|(J_n x)^H y|^2 for the matched filter), normalized
to the profile peak in dB.  The distortionless MVDR normalization is
deliberately not applied per bin: it would rescale the clutter bin back to
the clutter amplitude and hide the adaptive null that whitening creates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    SingularCovarianceError,
    ZeroSignalError,
)
from .numerics import hermitian_solve
from .signals import Channel, Scenario, build_channel, clutter_response, shift_apply


@dataclass(frozen=True)
class FilterWeights:
    """Steered filter with the distortionless normalization w^H J_n x = 1."""

    w: np.ndarray = field(repr=False)
    kind: str = "amf"
    steer_bin: int = 0


class ScnrValue(NamedTuple):
    gamma: float
    rho: float


def clutter_covariance(scenario: Scenario, x: np.ndarray) -> np.ndarray:
    """Clutter-plus-noise covariance R = c c^H + sigma_n2 I."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (scenario.n,):
        raise DimensionMismatchError("x length does not match scenario")
    c = clutter_response(scenario, x)
    return np.outer(c, c.conj()) + scenario.sigma_n2 * np.eye(scenario.n)


def _whiten(scenario: Scenario, c: np.ndarray, v: np.ndarray) -> np.ndarray:
    """R^{-1} v for R = c c^H + sigma_n2 I, in closed form."""
    s2 = scenario.sigma_n2
    if s2 <= 0:
        raise SingularCovarianceError("noise power must be positive")
    denom = s2 + np.vdot(c, c).real
    return (v - c * (np.vdot(c, v) / denom)) / s2


def amf_weights(scenario: Scenario, x: np.ndarray) -> FilterWeights:
    """MVDR solution w = R^{-1} J_{n0} x / (x^H J_{n0}^H R^{-1} J_{n0} x)."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (scenario.n,):
        raise DimensionMismatchError("x length does not match scenario")
    c = clutter_response(scenario, x)
    steer = shift_apply(scenario.target_bin, x)
    rv = _whiten(scenario, c, steer)
    denom = np.vdot(steer, rv).real
    if denom <= 0:
        raise SingularCovarianceError("steering vector annihilated by covariance")
    return FilterWeights(w=rv / denom, kind="amf", steer_bin=scenario.target_bin)


def mf_weights(x: np.ndarray, steer_bin: int) -> FilterWeights:
    """Correlator with the shifted waveform, normalized to w^H J_n x = 1."""
    x = np.asarray(x, dtype=complex)
    energy = np.vdot(x, x).real
    if energy == 0.0:
        raise ZeroSignalError("cannot match an all-zero waveform")
    return FilterWeights(w=shift_apply(steer_bin, x) / energy, kind="mf", steer_bin=steer_bin)


def instantaneous_scnr(
    scenario: Scenario,
    x: np.ndarray,
    channel: Channel | None = None,
    method: str = "sherman_morrison",
) -> ScnrValue:
    """Output SCNR of the optimally weighted filter for one block.

    Both evaluation paths compute |beta0|^2 x^H (H x x^H H^H + sigma_n2 I)^{-1} x:
    the default uses the rank-one inverse
    gamma = (|beta0|^2 / sigma_n2) (||x||^2 - |x^H H x|^2 / (sigma_n2 + ||H x||^2)),
    while ``method="direct"`` solves the dense system as a cross-check.
    Also returns rho = 1 / (sigma_n2 + ||H x||^2).
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (scenario.n,):
        raise DimensionMismatchError("x length does not match scenario")
    if channel is None:
        channel = build_channel(scenario)
    s2 = scenario.sigma_n2
    hx = channel.matrix @ x
    rho = 1.0 / (s2 + np.vdot(hx, hx).real)
    scale = np.abs(scenario.beta0) ** 2
    if method == "sherman_morrison":
        quad = np.vdot(x, x).real - rho * np.abs(np.vdot(x, hx)) ** 2
        gamma = scale / s2 * quad
    elif method == "direct":
        phi_inv = np.outer(hx, hx.conj()) + s2 * np.eye(scenario.n)
        gamma = scale * np.vdot(x, hermitian_solve(phi_inv, x)).real
    else:
        raise ValueError(f"unknown method {method!r}")
    return ScnrValue(gamma=float(gamma), rho=float(rho))


@dataclass(frozen=True)
class RangeProfile:
    bins: np.ndarray
    power_db: np.ndarray
    kind: str

    @property
    def peak_bin(self) -> int:
        return int(self.bins[np.argmax(self.power_db)])


def range_profile(scenario: Scenario, x: np.ndarray, kind: str) -> RangeProfile:
    """Noise-free steered filter output per delay bin, peak-normalized in dB."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (scenario.n,):
        raise DimensionMismatchError("x length does not match scenario")
    kind = kind.lower()
    if kind not in ("mf", "amf"):
        raise ValueError(f"profile kind must be 'mf' or 'amf', got {kind!r}")
    c = clutter_response(scenario, x)
    y_clean = scenario.beta0 * shift_apply(scenario.target_bin, x) + c
    n = scenario.n
    powers = np.empty(n)
    for bin_ in range(n):
        steer = shift_apply(bin_, x)
        v = steer if kind == "mf" else _whiten(scenario, c, steer)
        powers[bin_] = np.abs(np.vdot(v, y_clean)) ** 2
    peak = powers.max()
    if peak == 0.0:
        raise ZeroSignalError("profile is identically zero")
    power_db = 10.0 * np.log10(np.maximum(powers / peak, 1e-300))
    return RangeProfile(bins=np.arange(n), power_db=power_db, kind=kind)
