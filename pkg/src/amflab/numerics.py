"""Deterministic complex-matrix kernel and reproducible random streams.

Everything here is pure: identical inputs give bit-identical outputs, and
all numerical contracts reference the single tolerance record `TOL`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatchError,
    EmptyInputError,
    NonFiniteError,
    NonHermitianError,
    NotPositiveDefiniteError,
)


@dataclass(frozen=True)
class Tolerances:
    """Central tolerance record referenced by implementations and tests."""

    hermitian_check: float = 1e-12
    solve_residual: float = 1e-10
    decomposition: float = 1e-9
    unitarity: float = 1e-10
    fixed_point_residual: float = 1e-10
    fixed_point_step: float = 1e-12


TOL = Tolerances()


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def stream_rng(master_seed: int, *stream: int) -> np.random.Generator:
    """Reproducible random stream keyed by (master_seed, *stream).

    Identical keys give bit-identical draw sequences; distinct keys give
    statistically independent streams (SeedSequence spawn keys).
    """
    key = tuple(int(s) for s in stream)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SeededRng:
    """Handle for one reproducible stream of a master seed."""

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return stream_rng(self.master_seed, self.stream_id)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def require_finite(arr: np.ndarray, what: str = "array") -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} contains NaN or Inf")


def hermitian_gap(a: np.ndarray) -> float:
    """Relative deviation from Hermitian symmetry in Frobenius norm."""
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / scale)


def require_hermitian(a: np.ndarray, tol: float = TOL.hermitian_check) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected square matrix, got shape {a.shape}")
    if hermitian_gap(a) > tol:
        raise NonHermitianError(
            f"matrix is not Hermitian within {tol:g} (gap {hermitian_gap(a):.3e})"
        )


# ---------------------------------------------------------------------------
# Solvers and decompositions
# ---------------------------------------------------------------------------

def hermitian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b for Hermitian positive-definite A via Cholesky.

    Raises NonHermitianError / NotPositiveDefiniteError on precondition
    failure and guarantees a relative residual below TOL.solve_residual
    (one step of iterative refinement is applied if needed).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    require_hermitian(a)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatchError(f"A is {a.shape}, b has leading dim {b.shape[0]}")
    require_finite(a, "matrix")
    require_finite(b, "right-hand side")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    bnorm = np.linalg.norm(b)
    if bnorm > 0:
        resid = np.linalg.norm(a @ x - b) / bnorm
        if resid > TOL.solve_residual:
            x = x + scipy.linalg.cho_solve(factor, b - a @ x, check_finite=False)
            resid = np.linalg.norm(a @ x - b) / bnorm
            if resid > TOL.solve_residual:
                raise NotPositiveDefiniteError(
                    f"solve residual {resid:.3e} exceeds {TOL.solve_residual:g}"
                )
    return x


def circulant_eigenvalues(first_column: np.ndarray) -> np.ndarray:
    """Eigenvalues of the circulant matrix with the given first column.

    Ordered by DFT bin: lambda_k = sum_n c_n exp(-2i pi k n / N), i.e. the
    unnormalized DFT of the column.
    """
    c = np.asarray(first_column, dtype=complex).ravel()
    if c.size == 0:
        raise EmptyInputError("circulant first column is empty")
    require_finite(c, "first column")
    return np.fft.fft(c)


def circulant_matrix(first_column: np.ndarray) -> np.ndarray:
    """Dense circulant matrix with the given first column (test oracle)."""
    c = np.asarray(first_column, dtype=complex).ravel()
    if c.size == 0:
        raise EmptyInputError("circulant first column is empty")
    n = c.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return c[idx]


def unitary_dft(n: int) -> np.ndarray:
    """Unitary DFT matrix F with F[m, k] = exp(-2i pi m k / n) / sqrt(n)."""
    m = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(m, m) / n) / np.sqrt(n)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate v so its first significantly nonzero entry is real nonnegative."""
    v = np.asarray(v, dtype=complex)
    mags = np.abs(v)
    top = mags.max()
    if top == 0.0:
        return v.copy()
    idx = int(np.argmax(mags > 1e-12 * top))
    pivot = v[idx]
    if np.abs(pivot) == 0.0:
        return v.copy()
    return v * (pivot.conjugate() / np.abs(pivot))


def dominant_eigenpair(a: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and unit eigenvector of a Hermitian matrix.

    The eigenvector phase is fixed so its first nonzero component is real
    nonnegative, making results deterministic across runs.
    """
    a = np.asarray(a, dtype=complex)
    require_hermitian(a)
    vals, vecs = np.linalg.eigh(a)
    v = fix_phase(vecs[:, -1])
    return float(vals[-1]), v
