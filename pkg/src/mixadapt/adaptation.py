"""Posterior adaptation for convex mixtures of source domains.

Given per-source posterior estimates, per-source priors, mixture weights
over the sources, and a per-evidence source-membership distribution from a
domain discriminator, these functions compute the exact posterior in the
mixed target domain:

1. each source posterior is shifted from the priors its model was trained
   under to the source's true priors,
2. the discriminator output is shifted from the reference proportions it
   was trained under to the requested mixture weights, yielding
   evidence-conditional source weights,
3. the shifted posteriors are fused by a weighted arithmetic mean under
   those conditional weights.

``adapt_pixel`` composes the three stages for a single evidence;
``adapt_map`` runs the same arithmetic over dense H x W grids through a
compiled kernel that can be split across threads with bit-identical output
regardless of the split (each pixel is an independent pure function).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (
    AllZeroError,
    DimensionMismatchError,
    EmptySetError,
    ZeroPriorError,
)
from . import simplex
from .simplex import target_shift


def _as_stochastic_rows(rows, name: str) -> np.ndarray:
    a = np.asarray(rows, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a 2-D array, got shape {a.shape}")
    return np.stack([simplex.as_prob_vec(r) for r in a])


@dataclass(frozen=True)
class SourceBundle:
    """Per-source priors shared by every stage of the pipeline.

    ``train_priors[k]`` are the class priors source model ``k`` was trained
    under (its posterior reference); ``true_priors[k]`` are the actual class
    priors of source domain ``k``.  Both are (n, K) row-stochastic arrays.
    Instances are immutable and safe to share across threads.
    """

    train_priors: np.ndarray
    true_priors: np.ndarray

    def __post_init__(self):
        train = _as_stochastic_rows(self.train_priors, "train_priors")
        true = _as_stochastic_rows(self.true_priors, "true_priors")
        if train.shape != true.shape:
            raise DimensionMismatchError(
                f"train_priors {train.shape} and true_priors {true.shape} differ"
            )
        if np.any(train <= 0.0):
            k, h = np.argwhere(train <= 0.0)[0]
            raise ZeroPriorError(f"train_priors[{k}][{h}] must be strictly positive")
        train.setflags(write=False)
        true.setflags(write=False)
        object.__setattr__(self, "train_priors", train)
        object.__setattr__(self, "true_priors", true)

    @property
    def source_count(self) -> int:
        return self.train_priors.shape[0]

    @property
    def class_count(self) -> int:
        return self.train_priors.shape[1]

    @classmethod
    def with_uniform_train_priors(cls, true_priors) -> "SourceBundle":
        true = np.asarray(true_priors, dtype=np.float64)
        uniform = np.full_like(true, 1.0 / true.shape[1])
        return cls(train_priors=uniform, true_priors=true)


def uniform_weights(source_count: int) -> np.ndarray:
    """Default reference weights: each source equally represented."""
    return np.full(source_count, 1.0 / source_count)


def check_mixture_weights(lam, source_count: int | None = None) -> np.ndarray:
    lam = simplex.as_prob_vec(lam)
    if source_count is not None and lam.size != source_count:
        raise DimensionMismatchError(f"expected {source_count} mixture weights, got {lam.size}")
    return lam


def check_reference_weights(kappa, source_count: int | None = None) -> np.ndarray:
    kappa = simplex.as_prob_vec(kappa)
    if source_count is not None and kappa.size != source_count:
        raise DimensionMismatchError(f"expected {source_count} reference weights, got {kappa.size}")
    if np.any(kappa <= 0.0):
        raise ZeroPriorError(
            f"reference weights must be strictly positive, got 0 at index {int(np.argmin(kappa))}"
        )
    return kappa


def mixture_priors(bundle: SourceBundle, lam) -> np.ndarray:
    """Class priors of the target domain: the lambda-mixture of source priors."""
    lam = check_mixture_weights(lam, bundle.source_count)
    return lam @ bundle.true_priors


def likelihood_mixture_weights(bundle: SourceBundle, lam) -> np.ndarray:
    """Per-class source weights that decompose the target likelihoods.

    Returns an (n, K) matrix whose column for class H is the source
    distribution ``lam_k * true_priors[k][H] / mixture_priors[H]``; every
    column sums to 1.  A class with zero mixture prior has no defined
    decomposition and raises :class:`ZeroPriorError`.
    """
    lam = check_mixture_weights(lam, bundle.source_count)
    mix = lam @ bundle.true_priors
    if np.any(mix == 0.0):
        bad = int(np.flatnonzero(mix == 0.0)[0])
        raise ZeroPriorError(f"class {bad} has zero prior in the requested mixture")
    return lam[:, None] * bundle.true_priors / mix[None, :]


def conditional_weights_exact(lam, evidence_densities) -> np.ndarray:
    """Evidence-conditional source weights from true per-source densities.

    ``w_k ~ lam_k * density_k``, normalized over sources.  Raises
    :class:`AllZeroError` when the mixture assigns the evidence zero
    density (the evidence is impossible in the target domain).
    """
    lam = simplex.as_prob_vec(lam)
    dens = np.asarray(evidence_densities, dtype=np.float64)
    if dens.shape != lam.shape:
        raise DimensionMismatchError(f"weights {lam.shape} vs densities {dens.shape}")
    num = lam * dens
    total = num.sum()
    if total <= 0.0:
        raise AllZeroError("evidence has zero density under the target mixture")
    return num / total


def conditional_weights_from_discriminator(lam, kappa, disc) -> np.ndarray:
    """Evidence-conditional source weights from a discriminator output.

    The discriminator was trained under reference proportions ``kappa``;
    its per-evidence source posterior ``disc`` is re-referenced to the
    requested mixture ``lam``.  This is the same prior-shift kernel used
    for class posteriors, applied over sources.
    """
    lam = check_mixture_weights(lam)
    kappa = check_reference_weights(kappa, lam.size)
    disc = simplex.as_prob_vec(disc)
    if disc.size != lam.size:
        raise DimensionMismatchError(f"discriminator size {disc.size} vs {lam.size} sources")
    return target_shift(disc, kappa, lam)


def fuse_posteriors(omega, source_posteriors) -> np.ndarray:
    """Weighted arithmetic mean of per-source posteriors."""
    omega = simplex.as_prob_vec(omega)
    posts = np.asarray(source_posteriors, dtype=np.float64)
    if posts.ndim != 2 or posts.shape[0] != omega.size:
        raise DimensionMismatchError(
            f"expected ({omega.size}, K) posteriors, got shape {posts.shape}"
        )
    return (omega[:, None] * posts).sum(axis=0)


def plausible_sources(omega, threshold: float = 0.0) -> set[int]:
    """Sources whose conditional weight exceeds the threshold.

    With softmax-style discriminators every weight is positive, so the
    default threshold of 0 keeps all sources; raising it sparsifies.
    Raises :class:`EmptySetError` when the threshold is at or above the
    maximum weight.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if threshold >= omega.max():
        raise EmptySetError(f"threshold {threshold} >= max weight {omega.max()}")
    return set(int(i) for i in np.flatnonzero(omega > threshold))


def adapt_pixel(star_posteriors, bundle: SourceBundle, disc, lam, kappa=None) -> np.ndarray:
    """Target-domain posterior for one evidence.

    ``star_posteriors`` holds each source model's raw output (one posterior
    per source, in that model's training reference); ``disc`` is the domain
    discriminator's output for the same evidence.  Errors from individual
    stages are re-raised with the stage identified.
    """
    posts = np.asarray(star_posteriors, dtype=np.float64)
    if posts.ndim != 2:
        raise DimensionMismatchError(f"expected (n, K) star posteriors, got shape {posts.shape}")
    n, k = posts.shape
    if (n, k) != (bundle.source_count, bundle.class_count):
        raise DimensionMismatchError(
            f"star posteriors {posts.shape} vs bundle ({bundle.source_count}, {bundle.class_count})"
        )
    if kappa is None:
        kappa = uniform_weights(n)

    shifted = np.empty_like(posts)
    for i in range(n):
        try:
            shifted[i] = target_shift(posts[i], bundle.train_priors[i], bundle.true_priors[i])
        except (ZeroPriorError, AllZeroError) as e:
            raise type(e)(f"source shift (source {i}): {e}") from e
    try:
        omega = conditional_weights_from_discriminator(lam, kappa, disc)
    except (ZeroPriorError, AllZeroError) as e:
        raise type(e)(f"conditional weights: {e}") from e
    return fuse_posteriors(omega, shifted)


# --- dense maps ---------------------------------------------------------------

@dataclass(frozen=True)
class PosteriorMap:
    """Dense H x W grid of probability vectors, channels last."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 3 or min(a.shape) < 1:
            raise DimensionMismatchError(f"expected (H, W, C) with positive dims, got {a.shape}")
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


# Status codes reported by the compiled kernel; translated into exceptions
# with pixel coordinates by adapt_map.
_OK = 0
_ZERO_SHIFT_MASS = 1
_ZERO_WEIGHT_MASS = 2


@njit(cache=True, nogil=True)
def _adapt_kernel(star, disc, ratio, lam_over_kappa, out, start, stop, status):  # pragma: no cover
    n, _, k = star.shape
    scaled = np.empty(k)
    for p in range(start, stop):
        wsum = 0.0
        for j in range(n):
            wsum += disc[p, j] * lam_over_kappa[j]
        if not wsum > 0.0:
            status[0] = _ZERO_WEIGHT_MASS
            status[1] = p
            return
        for c in range(k):
            out[p, c] = 0.0
        for j in range(n):
            den = 0.0
            for c in range(k):
                value = star[j, p, c] * ratio[j, c]
                scaled[c] = value
                den += value
            if not den > 0.0:
                status[0] = _ZERO_SHIFT_MASS
                status[1] = p
                status[2] = j
                return
            coef = disc[p, j] * lam_over_kappa[j] / (wsum * den)
            for c in range(k):
                out[p, c] += coef * scaled[c]
    status[0] = _OK


def adapt_map(star_maps, bundle: SourceBundle, disc_map, lam, kappa=None,
              threads: int = 1) -> np.ndarray:
    """Per-pixel :func:`adapt_pixel` over dense maps.

    ``star_maps`` is (n, H, W, K) or a sequence of (H, W, K) arrays;
    ``disc_map`` is (H, W, n).  The output is (H, W, K) float64 and does
    not depend on ``threads``: pixel rows are partitioned across threads
    but each pixel's arithmetic is identical, so results are bit-identical
    for any thread count.  Fails fast with pixel coordinates on degenerate
    pixels instead of emitting NaNs.
    """
    star = np.ascontiguousarray(np.asarray(star_maps, dtype=np.float64))
    disc = np.ascontiguousarray(np.asarray(disc_map, dtype=np.float64))
    if star.ndim != 4:
        raise DimensionMismatchError(f"expected (n, H, W, K) star maps, got shape {star.shape}")
    if min(star.shape) < 1:
        raise DimensionMismatchError(f"map dimensions must be positive, got {star.shape}")
    n, h, w, k = star.shape
    if (n, k) != (bundle.source_count, bundle.class_count):
        raise DimensionMismatchError(
            f"star maps {star.shape} vs bundle ({bundle.source_count}, {bundle.class_count})"
        )
    if disc.shape != (h, w, n):
        raise DimensionMismatchError(f"discriminator map {disc.shape}, expected {(h, w, n)}")
    lam = check_mixture_weights(lam, n)
    kappa = uniform_weights(n) if kappa is None else check_reference_weights(kappa, n)
    if threads < 1:
        raise DimensionMismatchError(f"threads must be >= 1, got {threads}")

    ratio = bundle.true_priors / bundle.train_priors
    lam_over_kappa = lam / kappa
    pixels = h * w
    star_flat = star.reshape(n, pixels, k)
    disc_flat = disc.reshape(pixels, n)
    out = np.empty((pixels, k))

    blocks = min(threads, pixels)
    bounds = np.linspace(0, pixels, blocks + 1).astype(np.int64)
    statuses = [np.zeros(3, dtype=np.int64) for _ in range(blocks)]
    if blocks == 1:
        _adapt_kernel(star_flat, disc_flat, ratio, lam_over_kappa, out, 0, pixels, statuses[0])
    else:
        with ThreadPoolExecutor(max_workers=blocks) as pool:
            futures = [
                pool.submit(_adapt_kernel, star_flat, disc_flat, ratio, lam_over_kappa,
                            out, int(bounds[i]), int(bounds[i + 1]), statuses[i])
                for i in range(blocks)
            ]
            for f in futures:
                f.result()

    for status in statuses:
        if status[0] == _OK:
            continue
        p = int(status[1])
        r, c = divmod(p, w)
        if status[0] == _ZERO_SHIFT_MASS:
            raise AllZeroError(
                f"source shift (source {int(status[2])}) produced zero mass at pixel ({r}, {c})"
            )
        raise AllZeroError(f"conditional weights have zero mass at pixel ({r}, {c})")
    return out.reshape(h, w, k)
