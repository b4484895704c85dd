"""Exact arithmetic on probability simplices.

A probability vector is represented as a 1-D ``float64`` numpy array whose
entries are nonnegative and sum to 1.  All functions here are pure, operate
in 64-bit arithmetic regardless of the precision of the caller's data, and
are safe to call concurrently.

The two decision rules break ties deterministically toward the lowest
index, so results are reproducible across runs and platforms.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    AllZeroError,
    DimensionMismatchError,
    NegativeMassError,
    NotNormalizedError,
    ZeroPriorError,
)

NEGATIVE_CLAMP = 1e-12
SUM_TOLERANCE = 1e-6


def normalize(raw) -> np.ndarray:
    """Scale a vector of nonnegative masses so its entries sum to 1.

    Entries in ``(-1e-12, 0)`` are treated as rounding noise and clamped
    to zero.  Raises :class:`NegativeMassError` for anything more negative
    and :class:`AllZeroError` when no entry carries mass.
    """
    v = np.asarray(raw, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatchError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if np.any(v < -NEGATIVE_CLAMP):
        raise NegativeMassError(f"negative mass at index {int(np.argmin(v))}: {v.min()!r}")
    v = np.where(v < 0.0, 0.0, v)
    total = v.sum()
    if total <= 0.0:
        raise AllZeroError("no entry carries positive mass")
    return v / total


def as_prob_vec(values) -> np.ndarray:
    """Validate an externally supplied probability vector and renormalize.

    Accepts the small deviations from unit sum that float32 pipelines
    accumulate (|sum - 1| <= 1e-6); anything larger raises
    :class:`NotNormalizedError` because it signals a genuinely
    unnormalized input rather than rounding.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatchError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    total = v.sum()
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise NotNormalizedError(f"entries sum to {total!r}, expected 1 within {SUM_TOLERANCE}")
    return normalize(v)


def target_shift(posterior, from_priors, to_priors) -> np.ndarray:
    """Re-express a posterior under new priors, likelihoods held fixed.

    Multiplies each entry by ``to_priors[k] / from_priors[k]`` and
    renormalizes.  Entries where the posterior itself is zero stay zero
    (0/0 is taken as 0); a zero ``from_priors`` entry under positive
    posterior mass raises :class:`ZeroPriorError` instead of being
    clamped, since it indicates a miscalibrated input.
    """
    p = np.asarray(posterior, dtype=np.float64)
    src = np.asarray(from_priors, dtype=np.float64)
    dst = np.asarray(to_priors, dtype=np.float64)
    if not (p.shape == src.shape == dst.shape) or p.ndim != 1:
        raise DimensionMismatchError(
            f"posterior/from/to shapes differ: {p.shape}, {src.shape}, {dst.shape}"
        )
    mass = p > 0.0
    if np.any(src[mass] == 0.0):
        bad = int(np.flatnonzero(mass & (src == 0.0))[0])
        raise ZeroPriorError(f"reference prior is zero at index {bad} where posterior has mass")
    num = np.zeros_like(p)
    num[mass] = dst[mass] / src[mass] * p[mass]
    total = num.sum()
    if total <= 0.0:
        raise AllZeroError("shifted posterior has no mass; destination priors vanish on its support")
    return num / total


def decide_map(posterior) -> int:
    """Index of the most probable class; ties go to the lowest index."""
    p = np.asarray(posterior, dtype=np.float64)
    return int(np.argmax(p))


def decide_mle(posterior, priors) -> int:
    """Index of the class with the highest posterior-to-prior ratio.

    Equivalent to :func:`decide_map` after shifting to uniform priors.
    Ties go to the lowest index.
    """
    p = np.asarray(posterior, dtype=np.float64)
    q = np.asarray(priors, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionMismatchError(f"posterior/priors shapes differ: {p.shape}, {q.shape}")
    mass = p > 0.0
    if np.any(q[mass] == 0.0):
        bad = int(np.flatnonzero(mass & (q == 0.0))[0])
        raise ZeroPriorError(f"prior is zero at index {bad} where posterior has mass")
    ratios = np.zeros_like(p)
    ratios[mass] = p[mass] / q[mass]
    return int(np.argmax(ratios))


def _helmert(k: int) -> np.ndarray:
    """Orthonormal basis of the sum-zero subspace of R^k, as (k-1, k) rows."""
    h = np.zeros((k - 1, k))
    for i in range(1, k):
        h[i - 1, :i] = 1.0
        h[i - 1, i] = -float(i)
        h[i - 1] /= np.sqrt(i * (i + 1.0))
    return h


def simplex_embed(p) -> np.ndarray:
    """Map a length-K probability vector to coordinates in R^(K-1).

    The image of the simplex is regular (the embedding is an isometry of
    the canonical simplex), so the barycentric coordinate of each vertex
    equals the orthogonal-axis projection that is 1 at the vertex and 0
    on the opposite face.  Intended for plot emission.
    """
    v = np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise DimensionMismatchError(f"need a 1-D vector of length >= 2, got shape {v.shape}")
    k = v.size
    return _helmert(k) @ (v - 1.0 / k)


def simplex_project(coords, class_count: int) -> np.ndarray:
    """Inverse of :func:`simplex_embed` for points inside the simplex image."""
    s = np.asarray(coords, dtype=np.float64)
    if class_count < 2:
        raise DimensionMismatchError("class_count must be >= 2")
    if s.ndim != 1 or s.size != class_count - 1:
        raise DimensionMismatchError(
            f"expected {class_count - 1} coordinates for {class_count} classes, got shape {s.shape}"
        )
    return _helmert(class_count).T @ s + 1.0 / class_count


def simplex_vertex(index: int, class_count: int) -> np.ndarray:
    """Embedded coordinates of the vertex representing one class."""
    one_hot = np.zeros(class_count)
    one_hot[index] = 1.0
    return simplex_embed(one_hot)
