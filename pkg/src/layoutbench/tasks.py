"""Exact oracles and verifiers for the three task families.

Matrices and grids are plain 2D numpy arrays. Generated inputs are int64;
parsed predictions may be float64. Grids hold 0/1 values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TASKS = ("transpose", "life", "lu")

LU_ENTRY_RANGE = (-9, 9)
TRANSPOSE_ENTRY_RANGE = (0, 99)
LIFE_P_ALIVE = 0.5


@dataclass(frozen=True)
class LUPair:
    l: np.ndarray
    u: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, LUPair):
            return NotImplemented
        return (self.l.shape == other.l.shape and self.u.shape == other.u.shape
                and bool(np.array_equal(self.l, other.l))
                and bool(np.array_equal(self.u, other.u)))

    __hash__ = None


@dataclass(frozen=True)
class Tolerances:
    reconstruction_abs: float = 1e-6
    triangular_abs: float = 1e-6

    def __post_init__(self):
        if not (self.reconstruction_abs > 0 and self.triangular_abs > 0):
            raise ValueError("tolerances must be strictly positive")


@dataclass(frozen=True)
class Verdict:
    """Outcome of :func:`lu_verify`. ``reason`` is None when accepted."""

    accepted: bool
    reason: str | None = None
    residual: float | None = None

    def __bool__(self):
        return self.accepted


# reject reasons, in the order they are checked
SHAPE = "shape"
L_NOT_LOWER = "L not lower triangular"
U_NOT_UPPER = "U not upper triangular"
RECONSTRUCTION = "reconstruction"


def transpose(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"expected a 2D matrix, got ndim={m.ndim}")
    return np.ascontiguousarray(m.T)


def neighbor_counts(g: np.ndarray) -> np.ndarray:
    """Live-neighbor count of every cell, with everything off the board dead."""
    g = np.asarray(g, dtype=np.int64)
    padded = np.pad(g, 1)
    rows, cols = g.shape
    counts = np.zeros_like(g)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                counts += padded[1 + dr:1 + dr + rows, 1 + dc:1 + dc + cols]
    return counts


def life_step(g: np.ndarray) -> np.ndarray:
    """One synchronous Game of Life update under zero-padding boundaries."""
    g = np.asarray(g)
    if g.ndim != 2:
        raise ValueError(f"expected a 2D grid, got ndim={g.ndim}")
    if not np.isin(g, (0, 1)).all():
        raise ValueError("grid cells must be 0 or 1")
    n = neighbor_counts(g)
    alive = g == 1
    nxt = (alive & ((n == 2) | (n == 3))) | (~alive & (n == 3))
    return nxt.astype(np.int64)


def _nonzero_entries(rng: np.random.Generator, size: int) -> np.ndarray:
    lo, hi = LU_ENTRY_RANGE
    # uniform over [lo, hi] minus zero: draw [lo, hi-1], shift the non-negative half up
    x = rng.integers(lo, hi, size=size)
    return np.where(x >= 0, x + 1, x)


def lu_generate(n: int, rng: np.random.Generator) -> tuple[np.ndarray, LUPair]:
    """Random nonsingular integer ``A = L @ U`` with a pivot-free factorization.

    Free entries of both factors are integers in [-9, 9]; diagonals are drawn
    from the nonzero ones. ``L`` is not unit-diagonal.
    """
    if n < 2:
        raise ValueError("LU instances need n >= 2")
    lo, hi = LU_ENTRY_RANGE
    lower = np.tril(rng.integers(lo, hi, size=(n, n), endpoint=True), -1)
    upper = np.triu(rng.integers(lo, hi, size=(n, n), endpoint=True), 1)
    idx = np.arange(n)
    lower[idx, idx] = _nonzero_entries(rng, n)
    upper[idx, idx] = _nonzero_entries(rng, n)
    lower = lower.astype(np.int64)
    upper = upper.astype(np.int64)
    return lower @ upper, LUPair(lower, upper)


def lu_verify(a: np.ndarray, pair: LUPair, tol: Tolerances = Tolerances()) -> Verdict:
    """Functional check: triangular factors that reconstruct ``a``.

    Any triangular pair is accepted, unit diagonal or not. The reject reason is
    the first violated condition among shape, L, U, reconstruction.
    """
    a = np.asarray(a, dtype=np.float64)
    l = np.asarray(pair.l, dtype=np.float64)
    u = np.asarray(pair.u, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("target matrix must be square")
    if l.shape != a.shape or u.shape != a.shape:
        return Verdict(False, SHAPE)
    # written as not(x <= tol) so NaN counts as a violation
    if not (np.abs(np.triu(l, 1)) <= tol.triangular_abs).all():
        return Verdict(False, L_NOT_LOWER)
    if not (np.abs(np.tril(u, -1)) <= tol.triangular_abs).all():
        return Verdict(False, U_NOT_UPPER)
    with np.errstate(invalid="ignore", over="ignore"):
        residual = float(np.max(np.abs(l @ u - a)))
    if not residual <= tol.reconstruction_abs:
        return Verdict(False, RECONSTRUCTION, residual)
    return Verdict(True, None, residual)
