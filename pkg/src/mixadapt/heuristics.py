"""The three comparison heuristics used in evaluations.

None of these uses the evidence-conditional source weights; that is what
makes them heuristics.  All are pure functions; random selection is
counter-based so per-sample draws are reproducible and independent of
evaluation order.
"""

from __future__ import annotations

import numpy as np

from . import simplex
from .adaptation import SourceBundle, fuse_posteriors
from .errors import DimensionMismatchError
from .simplex import target_shift


def heuristic_source_model(k: int, star_posterior, bundle: SourceBundle,
                           target_priors) -> np.ndarray:
    """Use source model ``k`` alone, shifted to the target domain priors."""
    if not 0 <= k < bundle.source_count:
        raise DimensionMismatchError(f"source index {k} out of range [0, {bundle.source_count})")
    return target_shift(star_posterior, bundle.train_priors[k], target_priors)


def heuristic_linear_combination(lam, posteriors) -> np.ndarray:
    """Mix the per-source posteriors directly with the mixture weights.

    This applies the unconditional weights where the exact rule requires
    evidence-conditional ones, so it is only correct when the two happen
    to coincide (e.g. an uninformative discriminator).
    """
    return fuse_posteriors(lam, posteriors)


def _philox(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


# A Philox counter block yields 4 output words; each sample owns one
# block and uses its leading word, so per-sample draws can be addressed
# directly with advance() while the vectorized path strides the stream.
_PHILOX_BLOCK = 4


def selection_draws(lam, count: int, seed: int, stream: int = 0) -> np.ndarray:
    """Vectorized source selection: one source index per sample.

    Sample ``i`` is a pure function of ``(seed, stream, i)``; see
    :func:`heuristic_random_selection` for the single-sample view.
    """
    lam = simplex.as_prob_vec(lam)
    u = _philox(seed, stream).random(count * _PHILOX_BLOCK)[::_PHILOX_BLOCK]
    cuts = np.cumsum(lam)[:-1]
    return np.searchsorted(cuts, u, side="right")


def heuristic_random_selection(lam, decisions, seed: int, index: int = 0,
                               stream: int = 0) -> int:
    """Pick one source's decision at random, weighted by the mixture.

    The draw for sample ``index`` is made by a counter-based generator
    keyed on ``(seed, stream)`` and advanced to that sample's counter
    block, so it matches ``selection_draws(...)[index]`` and does not
    depend on how many other samples were evaluated or in what order.
    """
    lam = simplex.as_prob_vec(lam)
    decisions = np.asarray(decisions)
    if decisions.shape != lam.shape:
        raise DimensionMismatchError(f"{decisions.size} decisions for {lam.size} sources")
    bits = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
    bits.advance(index)
    u = np.random.Generator(bits).random()
    k = int(np.searchsorted(np.cumsum(lam)[:-1], u, side="right"))
    return int(decisions[k])
