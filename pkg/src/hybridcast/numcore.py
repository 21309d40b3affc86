"""Dense linear-algebra substrate and the seeded RNG.

Arrays are plain float64 numpy ndarrays (row-major); every function here
validates shapes and delegates the arithmetic to numpy/scipy. Keeping the
call sites on this module (instead of raw numpy) gives shape errors that
name both operands and keeps the numerical policy (Cholesky for SPD
systems, symmetric eigensolver) in one place.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ParameterError, ShapeError, SingularityError

SYMMETRY_TOL = 1e-10


def as_matrix(a, name: str = "a") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {arr.shape}")
    return arr


def as_vector(a, name: str = "a") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {arr.shape}")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} x {b.shape}")
    return a @ b


def _check_symmetric(a: np.ndarray, name: str) -> None:
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    if float(np.max(np.abs(a - a.T))) > SYMMETRY_TOL * scale:
        raise ShapeError(f"{name} is not symmetric within {SYMMETRY_TOL}")


def solve_spd(a, b) -> np.ndarray:
    """Solve a @ x = b for symmetric positive-definite a via Cholesky.

    Raises SingularityError when the factorization fails, i.e. the matrix
    is indefinite or numerically singular.
    """
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"solve_spd: a must be square, got {a.shape}")
    _check_symmetric(a, "a")
    b_arr = np.asarray(b, dtype=np.float64)
    if b_arr.shape[0] != a.shape[0]:
        raise ShapeError(f"solve_spd: b has {b_arr.shape[0]} rows, expected {a.shape[0]}")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularityError(f"solve_spd: matrix is not positive definite ({exc})") from exc
    return scipy.linalg.cho_solve(factor, b_arr, check_finite=False)


def sym_eigenvalues(a) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted descending."""
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"sym_eigenvalues: a must be square, got {a.shape}")
    _check_symmetric(a, "a")
    vals = np.linalg.eigvalsh(a)
    return vals[::-1].copy()


class Rng:
    """Seeded deterministic random source (PCG64).

    Equal seeds produce identical draw sequences; every stochastic piece
    of the toolkit draws through one of these so experiments replay
    exactly.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, n: int, mean: float = 0.0, sd: float = 1.0) -> np.ndarray:
        if sd < 0:
            raise ParameterError(f"normal: sd must be >= 0, got {sd}")
        return self._gen.normal(mean, sd, size=int(n))

    def uniform(self, shape, low: float, high: float) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(int(n))

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        return self._gen.integers(low, high, size=int(n))


def rng_normal(rng: Rng, n: int, mean: float = 0.0, sd: float = 1.0) -> np.ndarray:
    """n gaussian draws from the given source; sd must be non-negative."""
    return rng.normal(n, mean, sd)
