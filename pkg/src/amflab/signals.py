"""Transmit-side constructions: constellations, modulation bases, pilots,
circular-shift clutter channels, and noisy received frames.

Power bookkeeping is per-symbol in linear milliwatts: a scenario carries the
noise power ``sigma_n2``, the pilot power ``pilot_power`` and the data power
``data_power``, all per sample.  Data symbols are drawn unit-variance and
scaled by ``sqrt(data_power)`` at assembly, so the transmit block satisfies
``E ||x||^2 = N * data_power + ||x_p||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateDelayError,
    DimensionMismatchError,
    EmptyInputError,
    UnsupportedOrderError,
)
from .numerics import TOL, circulant_eigenvalues, require_finite, unitary_dft


def dbm_to_mw(dbm: float) -> float:
    return float(10.0 ** (dbm / 10.0))


def mw_to_dbm(mw: float) -> float:
    return float(10.0 * np.log10(mw))


# ---------------------------------------------------------------------------
# Constellations
# ---------------------------------------------------------------------------

CONSTELLATION_KINDS = ("psk", "qam", "gaussian")


@dataclass(frozen=True)
class Constellation:
    """Unit-variance, zero-mean, zero-pseudo-variance symbol law.

    ``points`` is the normalized finite alphabet (None for Gaussian) and
    ``kurtosis`` the exact fourth absolute moment E|s|^4.
    """

    kind: str
    order: int
    kurtosis: float
    points: np.ndarray | None = field(repr=False, default=None)

    @property
    def label(self) -> str:
        if self.kind == "gaussian":
            return "gaussian"
        return f"{self.kind}{self.order}"


def make_constellation(kind: str, order: int = 0) -> Constellation:
    """Build a normalized constellation with its exact kurtosis.

    PSK requires order >= 3: the order-2 alphabet {-1, +1} has pseudo-variance
    E[s^2] = 1, violating the circular-symmetry invariant every downstream
    moment formula relies on.  QAM requires a perfect-square order >= 4.
    """
    kind = kind.lower()
    if kind == "gaussian":
        return Constellation(kind="gaussian", order=0, kurtosis=2.0)
    if kind == "psk":
        if order < 3:
            raise UnsupportedOrderError(
                f"PSK order {order} has nonzero pseudo-variance; need order >= 3"
            )
        pts = np.exp(2j * np.pi * np.arange(order) / order)
    elif kind == "qam":
        side = int(round(np.sqrt(order)))
        if order < 4 or side * side != order:
            raise UnsupportedOrderError(f"QAM order {order} is not a perfect square >= 4")
        levels = np.arange(side, dtype=float) * 2 - (side - 1)
        grid = levels[:, None] + 1j * levels[None, :]
        pts = grid.ravel()
        pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    else:
        raise UnsupportedOrderError(f"unknown constellation kind {kind!r}")
    kurtosis = float(np.mean(np.abs(pts) ** 4))
    return Constellation(kind=kind, order=order, kurtosis=kurtosis, points=pts)


def sample_symbols(c: Constellation, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. symbols from the constellation."""
    if n < 1:
        raise EmptyInputError("need at least one symbol")
    if c.kind == "gaussian":
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        return z / np.sqrt(2.0)
    return c.points[rng.integers(0, c.points.size, size=n)]


# ---------------------------------------------------------------------------
# Modulation bases
# ---------------------------------------------------------------------------

BASIS_KINDS = ("sc", "ofdm", "afdm", "custom")


@dataclass(frozen=True)
class ModulationBasis:
    """Unitary map from symbol vectors to time-domain samples."""

    kind: str
    n: int
    matrix: np.ndarray = field(repr=False)
    c1: float | None = None
    c2: float | None = None

    @property
    def label(self) -> str:
        return self.kind


def make_basis(
    kind: str,
    n: int,
    c1: float | None = None,
    c2: float | None = None,
    matrix: np.ndarray | None = None,
) -> ModulationBasis:
    """Construct a modulation basis and verify its unitarity.

    sc is the identity, ofdm the unitary inverse DFT (time-domain synthesis
    from frequency symbols), and afdm the chirp-scaled inverse DFT
    U = diag(e^{+2i pi c1 m^2}) F^H diag(e^{+2i pi c2 m^2}) with the
    conventional defaults c1 = 1/(4N), c2 = 1/(2N).
    """
    kind = kind.lower()
    if n < 1:
        raise EmptyInputError("basis dimension must be positive")
    if kind == "sc":
        u = np.eye(n, dtype=complex)
    elif kind == "ofdm":
        u = unitary_dft(n).conj().T
    elif kind == "afdm":
        if c1 is None:
            c1 = 1.0 / (4.0 * n)
        if c2 is None:
            c2 = 1.0 / (2.0 * n)
        m = np.arange(n)
        lam1 = np.exp(-2j * np.pi * c1 * m * m)
        lam2 = np.exp(-2j * np.pi * c2 * m * m)
        u = lam1.conj()[:, None] * unitary_dft(n).conj().T * lam2.conj()[None, :]
    elif kind == "custom":
        if matrix is None:
            raise DimensionMismatchError("custom basis requires an explicit matrix")
        u = np.asarray(matrix, dtype=complex)
        if u.shape != (n, n):
            raise DimensionMismatchError(f"custom basis must be {n}x{n}, got {u.shape}")
    else:
        raise UnsupportedOrderError(f"unknown basis kind {kind!r}")
    gap = np.linalg.norm(u.conj().T @ u - np.eye(n))
    if gap > TOL.unitarity * n:
        raise DimensionMismatchError(f"basis is not unitary (gap {gap:.3e})")
    return ModulationBasis(kind=kind, n=n, matrix=u, c1=c1, c2=c2)


# ---------------------------------------------------------------------------
# Circular shifts
# ---------------------------------------------------------------------------

def shift_apply(k: int, x: np.ndarray) -> np.ndarray:
    """Apply the k-sample circular shift operator J_k to a vector.

    J_k has block form [[0, I_{N-k}], [I_k, 0]], so (J_k x)_i = x_{(i+k) mod N}.
    Shifts compose additively: J_a J_b = J_{a+b mod N}.
    """
    x = np.asarray(x)
    return np.roll(x, -int(k) % x.shape[0], axis=0)


def shift_matrix(k: int, n: int) -> np.ndarray:
    """Dense J_k (mostly a test oracle; prefer shift_apply)."""
    return np.roll(np.eye(n, dtype=complex), int(k) % n, axis=1)


# ---------------------------------------------------------------------------
# Scenario and channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """Complete sensing environment for one block length.

    ``clutter`` is a tuple of (complex gain, delay bin) pairs; delay bins
    live in [0, N) and must differ from the target bin.
    """

    n: int
    sigma_n2: float
    beta0: complex
    target_bin: int
    clutter: tuple[tuple[complex, int], ...]
    pilot_power: float
    data_power: float
    slots: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise EmptyInputError("block length must be positive")
        if self.sigma_n2 <= 0 or self.pilot_power <= 0 or self.data_power <= 0:
            raise DimensionMismatchError("powers must be strictly positive")
        if not 0 <= self.target_bin < self.n:
            raise DegenerateDelayError(f"target bin {self.target_bin} outside [0, {self.n})")
        for gain, bin_ in self.clutter:
            if not 0 <= bin_ < self.n:
                raise DegenerateDelayError(f"clutter bin {bin_} outside [0, {self.n})")
            if bin_ == self.target_bin:
                raise DegenerateDelayError(
                    f"clutter bin {bin_} coincides with the target bin"
                )
        if self.slots < 1:
            raise DimensionMismatchError("slot count must be >= 1")

    @property
    def clutter_count(self) -> int:
        return len(self.clutter)

    @property
    def pilot_budget(self) -> float:
        """Pilot energy budget ||x_p||^2 <= pilot_power * N."""
        return self.pilot_power * self.n

    def with_clutter_scale(self, scale: float) -> "Scenario":
        scaled = tuple((g * scale, b) for g, b in self.clutter)
        return Scenario(
            n=self.n,
            sigma_n2=self.sigma_n2,
            beta0=self.beta0,
            target_bin=self.target_bin,
            clutter=scaled,
            pilot_power=self.pilot_power,
            data_power=self.data_power,
            slots=self.slots,
        )


@dataclass(frozen=True)
class ClutterGeometry:
    """Distance-based clutter gain model: CN(0, 10^{-0.1 theta(d)}) with
    theta(d) = intercept + 10 * exponent * log10(d) + shadow, shadow drawn
    real N(0, shadow_sigma_db^2) per path."""

    distances: tuple[float, ...]
    intercept: float = 61.4
    exponent: float = 2.0
    shadow_sigma_db: float = 5.8

    def __post_init__(self):
        if any(d <= 0 for d in self.distances):
            raise DimensionMismatchError("clutter distances must be positive")
        if self.exponent <= 0:
            raise DimensionMismatchError("path-loss exponent must be positive")


def path_gain_variance(
    distance: float,
    intercept: float = 61.4,
    exponent: float = 2.0,
    shadow_db: float = 0.0,
) -> float:
    """Mean-square path gain 10^{-0.1 theta(d)} for one path."""
    theta = intercept + 10.0 * exponent * np.log10(distance) + shadow_db
    return float(10.0 ** (-0.1 * theta))


def sample_clutter_gains(geometry: ClutterGeometry, rng: np.random.Generator) -> np.ndarray:
    """Draw one complex gain per configured distance.

    The shadowing term is drawn as a real Gaussian in dB: the loss exponent
    must be real for the variance to be defined.
    """
    gains = np.empty(len(geometry.distances), dtype=complex)
    for i, d in enumerate(geometry.distances):
        shadow = rng.normal(0.0, geometry.shadow_sigma_db)
        var = path_gain_variance(d, geometry.intercept, geometry.exponent, shadow)
        z = rng.standard_normal() + 1j * rng.standard_normal()
        gains[i] = np.sqrt(var / 2.0) * z
    return gains


@dataclass(frozen=True)
class Channel:
    """Clutter channel H = sum_q beta_q J_{(n_q - n0) mod N} with its
    circulant eigenvalues (DFT-bin order) and the merged (gain, offset)
    path list."""

    n: int
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    paths: tuple[tuple[complex, int], ...] = ()

    @property
    def singular_values(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def build_channel(scenario: Scenario) -> Channel:
    """Assemble the delay-offset clutter channel for a scenario.

    Paths sharing one offset are merged into a single effective gain, which
    keeps the fourth-moment formulas exact.  The channel is circulant, so its
    eigenvalues are the DFT of the first column.
    """
    n = scenario.n
    merged: dict[int, complex] = {}
    for gain, bin_ in scenario.clutter:
        offset = (bin_ - scenario.target_bin) % n
        if offset == 0:
            raise DegenerateDelayError("clutter delay equals target delay")
        merged[offset] = merged.get(offset, 0.0 + 0.0j) + complex(gain)
    first_col = np.zeros(n, dtype=complex)
    for offset, gain in merged.items():
        # J_k has first column e_{(N-k) mod N}
        first_col[(n - offset) % n] += gain
    h = np.zeros((n, n), dtype=complex)
    for offset, gain in merged.items():
        h += gain * shift_matrix(offset, n)
    paths = tuple(sorted(((g, k) for k, g in merged.items()), key=lambda t: t[1]))
    return Channel(n=n, matrix=h, eigenvalues=circulant_eigenvalues(first_col), paths=paths)


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TxFrame:
    """Superimposed transmit block x = x_p + sqrt(P_d) U s_d."""

    pilot: np.ndarray = field(repr=False)
    symbols: np.ndarray = field(repr=False)
    data: np.ndarray = field(repr=False)
    vector: np.ndarray = field(repr=False)


def allone_pilot(n: int, pilot_power: float) -> np.ndarray:
    """All-one pilot scaled to the full budget: entries sqrt(P_p)."""
    return np.full(n, np.sqrt(pilot_power), dtype=complex)


def chirp_pilot(n: int, pilot_power: float) -> np.ndarray:
    """Quadratic-phase constant-modulus pilot at full budget.

    Its DFT power profile is flat, unlike the all-one pilot whose profile is
    an impulse at DC.  The all-one vector is an eigenvector of every
    circulant matrix, which makes it a degenerate critical point of
    covariance-shaping objectives; this pilot seeds every shape direction.
    """
    m = np.arange(n)
    return np.sqrt(pilot_power) * np.exp(1j * np.pi * m * m / n)


def assemble_tx(
    x_p: np.ndarray,
    basis: ModulationBasis,
    s_d: np.ndarray,
    data_power: float,
) -> TxFrame:
    """Superimpose a pilot on a modulated, power-scaled payload."""
    x_p = np.asarray(x_p, dtype=complex)
    s_d = np.asarray(s_d, dtype=complex)
    if x_p.shape != (basis.n,) or s_d.shape != (basis.n,):
        raise DimensionMismatchError(
            f"pilot/symbols must have length {basis.n}, got {x_p.shape} and {s_d.shape}"
        )
    data = np.sqrt(data_power) * (basis.matrix @ s_d)
    return TxFrame(pilot=x_p, symbols=s_d, data=data, vector=x_p + data)


def clutter_response(scenario: Scenario, x: np.ndarray) -> np.ndarray:
    """Clutter component of the received block: sum_q beta_q J_{n_q} x."""
    out = np.zeros_like(np.asarray(x, dtype=complex))
    for gain, bin_ in scenario.clutter:
        out += gain * shift_apply(bin_, x)
    return out


def receive(scenario: Scenario, frame: TxFrame, rng: np.random.Generator) -> np.ndarray:
    """Noisy received block: target echo + clutter + CN(0, sigma_n2 I) noise."""
    x = frame.vector
    if x.shape != (scenario.n,):
        raise DimensionMismatchError("frame length does not match scenario")
    require_finite(x, "transmit vector")
    y = scenario.beta0 * shift_apply(scenario.target_bin, x) + clutter_response(scenario, x)
    noise = rng.standard_normal(scenario.n) + 1j * rng.standard_normal(scenario.n)
    return y + np.sqrt(scenario.sigma_n2 / 2.0) * noise
