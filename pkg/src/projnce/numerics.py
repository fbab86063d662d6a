"""Dense-vector utilities, digamma, finite differences, and seeded RNG streams.

Everything here is float64 and pure; RNG streams are owned by their creator
and split by name so parallel experiments stay reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import DegenerateNorm, DimensionError, DomainError, EvalError

EPS_NORM = 1e-12

# Bernoulli numbers B_2..B_14 for the digamma asymptotic tail.
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


def as_vec(x) -> np.ndarray:
    """Validate and return a finite 1-d float64 vector."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"expected a nonempty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise EvalError("vector contains NaN or Inf")
    return v


def as_mat(x) -> np.ndarray:
    """Validate and return a finite 2-d float64 matrix."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError(f"expected a nonempty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise EvalError("matrix contains NaN or Inf")
    return m


def dot(u, v) -> float:
    """Inner product of two equal-length vectors."""
    u = as_vec(u)
    v = as_vec(v)
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    return float(np.dot(u, v))


def normalize_sphere(u) -> np.ndarray:
    """Project a vector onto the unit sphere; degenerate norms are an error."""
    u = as_vec(u)
    n = float(np.linalg.norm(u))
    if n <= EPS_NORM:
        raise DegenerateNorm(f"norm {n:.3e} <= {EPS_NORM}")
    return u / n


def normalize_rows(U: np.ndarray) -> np.ndarray:
    """Row-wise sphere normalization for a matrix of vectors."""
    U = as_mat(U)
    norms = np.linalg.norm(U, axis=1)
    if np.any(norms <= EPS_NORM):
        raise DegenerateNorm("a row norm is <= 1e-12")
    return U / norms[:, None]


def digamma(x):
    """Digamma psi(x) for x > 0, scalar or array, accurate to ~1e-12.

    Uses the recurrence psi(x) = psi(x+1) - 1/x to shift the argument
    above 6, then a seven-term asymptotic series.
    """
    scalar = np.isscalar(x) or np.ndim(x) == 0
    z = np.atleast_1d(np.asarray(x, dtype=np.float64)).copy()
    if np.any(~np.isfinite(z)) or np.any(z <= 0.0):
        raise DomainError("digamma requires finite x > 0")
    acc = np.zeros_like(z)
    # each pass shifts every entry below 6 up by one
    for _ in range(6):
        small = z < 6.0
        if not np.any(small):
            break
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
    inv2 = 1.0 / (z * z)
    tail = np.zeros_like(z)
    power = inv2.copy()
    for n, b in enumerate(_BERNOULLI, start=1):
        tail += b / (2 * n) * power
        power *= inv2
    out = acc + np.log(z) - 0.5 / z - tail
    return float(out[0]) if scalar else out


def central_diff_grad(f, theta, eps: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of a vector."""
    theta = as_vec(theta)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = eps
        hi = f(theta + step)
        lo = f(theta - step)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise EvalError(f"non-finite evaluation at coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad


def _path_entropy(seed: int, path: tuple[str, ...]) -> list[int]:
    """Stable integer entropy for a named substream."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for name in path:
        digest = hashlib.sha256(name.encode("utf-8")).digest()
        words.extend(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    return words


class RngState:
    """Seeded, splittable random stream.

    The same (seed, path) always yields the bit-identical stream regardless
    of platform. ``split`` derives an independent named child stream;
    the parent's own draws are unaffected.
    """

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        self.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(_path_entropy(self.seed, self.path)))
        )

    def split(self, *names: str) -> "RngState":
        return RngState(self.seed, self.path + tuple(str(n) for n in names))

    def __repr__(self):
        return f"RngState(seed={self.seed}, path={'/'.join(self.path) or '<root>'})"
