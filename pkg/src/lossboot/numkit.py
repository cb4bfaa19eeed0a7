"""Small dense numeric kernel: SPD algebra and reproducible random streams.

Random streams are keyed on ``(seed, stream_id)`` and backed by the
counter-based Philox bit generator, so replicate ``j`` of a bootstrap always
sees the same draws no matter how replicates are scheduled over threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .errors import InvalidArgumentError, NotPositiveDefiniteError

SYMMETRY_RTOL = 1e-10

_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class RngStream:
    """An independent, reproducible random stream.

    Two streams with equal ``(seed, stream_id)`` produce bit-identical draw
    sequences; different ``stream_id`` values give independent sequences.
    Streams are plain values and can be created per task.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if isinstance(v, (bool, np.bool_)) or not isinstance(v, (int, np.integer)):
                raise InvalidArgumentError(f"{name} must be an integer, got {v!r}")
            if not 0 <= int(v) <= _UINT64_MAX:
                raise InvalidArgumentError(f"{name} must fit in an unsigned 64-bit integer, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministically derive a 64-bit seed from ``seed`` and integer keys."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise InvalidArgumentError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def dirichlet_uniform(n: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Draw one point from Dirichlet(1, ..., 1) on the ``n``-simplex.

    Uses normalized unit-rate exponentials (Gamma(1, 1) = Exp(1)).
    """
    if isinstance(n, (bool, np.bool_)) or int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    e = _as_generator(rng).standard_exponential(int(n))
    return e / e.sum()


def symmetrize(m) -> np.ndarray:
    """Return ``(m + m.T) / 2`` after checking ``m`` is square and nearly symmetric."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("matrix has non-finite entries")
    scale = np.abs(m).max() if m.size else 0.0
    if scale > 0 and np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
        raise InvalidArgumentError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def cholesky(m, pivot_rtol: float = 0.0) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Parameters
    ----------
    m : array_like
        Square matrix; symmetrized before factorization.
    pivot_rtol : float
        A pivot ``L[k, k]**2`` at or below ``pivot_rtol * max(diag(m))`` is
        treated as non-positive. The default only rejects genuinely
        non-positive pivots.

    Raises
    ------
    NotPositiveDefiniteError
        With the zero-based index of the first failing pivot.
    """
    a = symmetrize(m)
    d = a.shape[0]
    if d == 0:
        return a.copy()
    c, info = dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:  # pragma: no cover - LAPACK argument error
        raise InvalidArgumentError(f"dpotrf argument {-info} invalid")
    if pivot_rtol > 0:
        ref = max(float(np.max(np.diag(a))), 0.0)
        piv = np.diag(c) ** 2
        bad = np.flatnonzero(piv <= pivot_rtol * ref)
        if bad.size:
            k = int(bad[0])
            raise NotPositiveDefiniteError(
                k, f"matrix is numerically singular (pivot {k} = {piv[k]:.3g}, "
                f"below {pivot_rtol:g} x max diagonal {ref:.3g})")
    return c


def spd_inverse(m, pivot_rtol: float = 0.0) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor."""
    L = cholesky(m, pivot_rtol=pivot_rtol)
    d = L.shape[0]
    inv = cho_solve((L, True), np.eye(d))
    return 0.5 * (inv + inv.T)


def spd_solve(m, b, pivot_rtol: float = 0.0) -> np.ndarray:
    """Solve ``m x = b`` for SPD ``m``."""
    L = cholesky(m, pivot_rtol=pivot_rtol)
    return cho_solve((L, True), np.asarray(b, dtype=float))


def mvn_sample(mean, cov, rng: RngStream | np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``mean + L @ eps`` with ``L L^T = cov`` and ``eps`` standard normal.

    Returns a vector of length ``d`` if ``size`` is None, else a
    ``(size, d)`` array.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
        raise InvalidArgumentError(
            f"mean of length {mean.size} does not match covariance of shape {cov.shape}")
    L = cholesky(cov)
    gen = _as_generator(rng)
    if size is None:
        return mean + L @ gen.standard_normal(mean.size)
    eps = gen.standard_normal((int(size), mean.size))
    return mean + eps @ L.T
