"""Finite discrete generative domains with exactly computable posteriors.

These domains stand in for real datasets: evidence symbols play the role
of pixel observations, and everything a trained model would estimate
(class posteriors, evidence densities, source-membership posteriors) can
be computed exactly by enumeration.  That exactness is what lets the
fusion pipeline be certified against an independent brute-force route,
and lets bounded noise be injected with full control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simplex
from .adaptation import SourceBundle, check_reference_weights, fuse_posteriors
from .errors import (
    DimensionMismatchError,
    ImpossibleEvidenceError,
    InvalidParamError,
)


@dataclass(frozen=True)
class DiscreteDomain:
    """Class priors plus a (K, M) likelihood table over an evidence alphabet."""

    priors: np.ndarray
    likelihoods: np.ndarray

    def __post_init__(self):
        priors = simplex.as_prob_vec(self.priors)
        lik = np.asarray(self.likelihoods, dtype=np.float64)
        if lik.ndim != 2 or lik.shape[0] != priors.size:
            raise DimensionMismatchError(
                f"likelihood table {lik.shape} does not match {priors.size} classes"
            )
        lik = np.stack([simplex.as_prob_vec(row) for row in lik])
        priors.setflags(write=False)
        lik.setflags(write=False)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "likelihoods", lik)

    @property
    def class_count(self) -> int:
        return self.priors.size

    @property
    def evidence_count(self) -> int:
        return self.likelihoods.shape[1]

    def evidence_marginal(self) -> np.ndarray:
        """P(E) for every symbol: priors-weighted mixture of likelihood rows."""
        return self.priors @ self.likelihoods


def generate_domain(class_count: int, evidence_count: int, concentration: float,
                    seed: int) -> DiscreteDomain:
    """Draw priors and likelihood rows from a symmetric Dirichlet.

    Larger concentrations give flatter rows; the draw is deterministic
    given the seed.
    """
    if class_count < 1 or evidence_count < 1:
        raise InvalidParamError("class_count and evidence_count must be >= 1")
    if not concentration > 0.0:
        raise InvalidParamError(f"concentration must be positive, got {concentration}")
    rng = np.random.default_rng(seed)
    if class_count == 1:
        priors = np.ones(1)
    else:
        priors = rng.dirichlet(np.full(class_count, concentration))
    if evidence_count == 1:
        likelihoods = np.ones((class_count, 1))
    else:
        likelihoods = rng.dirichlet(np.full(evidence_count, concentration), size=class_count)
    return DiscreteDomain(priors=priors, likelihoods=likelihoods)


def exact_posterior(domain: DiscreteDomain, evidence: int) -> np.ndarray:
    """P(H | E) by direct Bayes inversion."""
    joint = domain.priors * domain.likelihoods[:, evidence]
    total = joint.sum()
    if total <= 0.0:
        raise ImpossibleEvidenceError(f"evidence {evidence} has zero probability")
    return joint / total


def exact_posterior_table(domain: DiscreteDomain) -> np.ndarray:
    """(M, K) table of exact posteriors for every evidence symbol."""
    joint = domain.priors[None, :] * domain.likelihoods.T
    totals = joint.sum(axis=1)
    if np.any(totals <= 0.0):
        bad = int(np.flatnonzero(totals <= 0.0)[0])
        raise ImpossibleEvidenceError(f"evidence {bad} has zero probability")
    return joint / totals[:, None]


def exact_discriminator(domains, kappa, evidence: int) -> np.ndarray:
    """Source-membership posterior a perfect discriminator would output.

    Sources are weighted by the reference proportions ``kappa`` they were
    mixed under at training time.
    """
    kappa = check_reference_weights(kappa, len(domains))
    dens = np.array([d.evidence_marginal()[evidence] for d in domains])
    num = kappa * dens
    total = num.sum()
    if total <= 0.0:
        raise ImpossibleEvidenceError(f"evidence {evidence} impossible in every source")
    return num / total


def exact_discriminator_table(domains, kappa) -> np.ndarray:
    """(M, n) table of exact discriminator outputs for every symbol."""
    kappa = check_reference_weights(kappa, len(domains))
    dens = np.stack([d.evidence_marginal() for d in domains])  # (n, M)
    num = kappa[:, None] * dens
    totals = num.sum(axis=0)
    if np.any(totals <= 0.0):
        bad = int(np.flatnonzero(totals <= 0.0)[0])
        raise ImpossibleEvidenceError(f"evidence {bad} impossible in every source")
    return (num / totals[None, :]).T


def brute_force_target_posterior(domains, lam, evidence: int) -> np.ndarray:
    """Target posterior computed directly on the mixture measure.

    Builds the joint ``sum_k lam_k * priors_k[H] * likelihoods_k[H][E]``
    and normalizes over H.  This route never touches the discriminator or
    the conditional-weight decomposition, so it independently certifies
    the staged pipeline.
    """
    lam = simplex.as_prob_vec(lam)
    if lam.size != len(domains):
        raise DimensionMismatchError(f"{lam.size} weights for {len(domains)} domains")
    joint = np.zeros(domains[0].class_count)
    for weight, domain in zip(lam, domains):
        joint += weight * domain.priors * domain.likelihoods[:, evidence]
    total = joint.sum()
    if total <= 0.0:
        raise ImpossibleEvidenceError(f"evidence {evidence} has zero target density")
    return joint / total


def mixture_joint_table(domains, lam) -> np.ndarray:
    """(M, K) exact joint P_T(E, H) of the lambda-mixture."""
    lam = simplex.as_prob_vec(lam)
    if lam.size != len(domains):
        raise DimensionMismatchError(f"{lam.size} weights for {len(domains)} domains")
    joint = np.zeros((domains[0].evidence_count, domains[0].class_count))
    for weight, domain in zip(lam, domains):
        joint += weight * (domain.priors[None, :] * domain.likelihoods.T)
    return joint


def source_bundle(domains, train_priors=None) -> SourceBundle:
    """Bundle the domains' priors; train priors default to uniform.

    Uniform training priors mirror class-balanced training of the source
    models; pass explicit rows to model anything else.
    """
    true = np.stack([d.priors for d in domains])
    if train_priors is None:
        return SourceBundle.with_uniform_train_priors(true)
    return SourceBundle(train_priors=np.asarray(train_priors, dtype=np.float64), true_priors=true)


def star_posterior_table(domain: DiscreteDomain, train_priors) -> np.ndarray:
    """(M, K) outputs of a source model that is exact up to a prior shift.

    The model's posteriors are referenced to ``train_priors`` instead of
    the domain's true priors; shifting them back recovers exactness.
    """
    train = simplex.as_prob_vec(train_priors)
    joint = train[None, :] * domain.likelihoods.T
    totals = joint.sum(axis=1)
    if np.any(totals <= 0.0):
        bad = int(np.flatnonzero(totals <= 0.0)[0])
        raise ImpossibleEvidenceError(f"evidence {bad} has zero probability under train priors")
    return joint / totals[:, None]


# --- sampling -----------------------------------------------------------------

def _categorical_rows(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling with a per-sample cumulative row."""
    return (u[:, None] >= cum_rows[:, :-1]).sum(axis=1)


def sample_mixture_dataset(domains, lam, count: int, seed: int):
    """I.i.d. draws from the lambda-mixture.

    Returns ``(evidence, classes, sources)`` index arrays of length
    ``count``: source ~ lambda, class ~ that source's priors, evidence ~
    the class's likelihood row.  Deterministic per seed.
    """
    lam = simplex.as_prob_vec(lam)
    if lam.size != len(domains):
        raise DimensionMismatchError(f"{lam.size} weights for {len(domains)} domains")
    if count < 1:
        raise InvalidParamError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    cum_lam = np.cumsum(lam)
    sources = (rng.random(count)[:, None] >= cum_lam[None, :-1]).sum(axis=1)

    cum_priors = np.cumsum(np.stack([d.priors for d in domains]), axis=1)
    classes = _categorical_rows(cum_priors[sources], rng.random(count))

    cum_lik = np.cumsum(np.stack([d.likelihoods for d in domains]), axis=2)
    evidence = _categorical_rows(cum_lik[sources, classes], rng.random(count))
    return evidence, classes, sources


def sample_domain_frame(domain: DiscreteDomain, height: int, width: int, seed: int):
    """One dense frame from a single domain: (class_labels, evidence) grids."""
    if height < 1 or width < 1:
        raise InvalidParamError("frame dimensions must be positive")
    evidence, classes, _ = sample_mixture_dataset([domain], [1.0], height * width, seed)
    return classes.reshape(height, width), evidence.reshape(height, width)


# --- bounded noise ------------------------------------------------------------

def perturb_prob_vec(exact: np.ndarray, epsilon: float, rng: np.random.Generator,
                     jitter: float = 2.0) -> np.ndarray:
    """A valid probability vector within L1 distance ``epsilon`` of ``exact``.

    Jitters in log space, renormalizes, then pulls the result back onto
    the L1 ball around ``exact``; the pullback is a convex combination, so
    the output is always a valid simplex point and the bound holds by
    construction.
    """
    if not 0.0 <= epsilon <= 2.0:
        raise InvalidParamError(f"epsilon must be in [0, 2], got {epsilon}")
    if epsilon == 0.0:
        return exact
    logits = np.log(np.maximum(exact, 1e-300)) + rng.uniform(-jitter, jitter, size=exact.size)
    noisy = np.exp(logits - logits.max())
    noisy /= noisy.sum()
    dist = np.abs(noisy - exact).sum()
    if dist > epsilon:
        noisy = exact + (noisy - exact) * (epsilon / dist)
        # the scaled sum can round one ulp past the budget; nudge back
        dist = np.abs(noisy - exact).sum()
        if dist > epsilon:
            noisy = exact + (noisy - exact) * (epsilon / dist) * (1.0 - 1e-12)
    return noisy


def perturb_provider(provider, epsilon: float, seed: int):
    """Wrap any ``f(evidence) -> ProbVec`` model with bounded noise.

    The wrapped model's output stays within L1 distance ``epsilon`` of the
    wrapped value and is a pure function of ``(seed, evidence)``, so calls
    are reproducible in any order.
    """
    if not 0.0 <= epsilon <= 2.0:
        raise InvalidParamError(f"epsilon must be in [0, 2], got {epsilon}")

    def noisy(evidence: int) -> np.ndarray:
        exact = np.asarray(provider(evidence), dtype=np.float64)
        rng = np.random.default_rng(np.random.SeedSequence([seed, int(evidence)]))
        return perturb_prob_vec(exact, epsilon, rng)

    return noisy


def perturbed_posterior_provider(domain: DiscreteDomain, epsilon: float, seed: int,
                                 train_priors=None):
    """Deterministically noisy posterior model for one domain."""
    table = (exact_posterior_table(domain) if train_priors is None
             else star_posterior_table(domain, train_priors))
    return perturb_provider(lambda evidence: table[evidence], epsilon, seed)


@dataclass(frozen=True)
class NoisySpec:
    """Noise budget for bound verification: L1 caps and a seed."""

    epsilon_source: float
    epsilon_omega: float
    seed: int = 0

    def __post_init__(self):
        for name in ("epsilon_source", "epsilon_omega"):
            value = getattr(self, name)
            if not 0.0 <= value <= 2.0:
                raise InvalidParamError(f"{name} must be in [0, 2], got {value}")


@dataclass(frozen=True)
class BoundReport:
    """Outcome of a fused-output error-bound verification run."""

    epsilon_source: float
    epsilon_omega: float
    trials: int
    max_error: float
    bound: float
    holds: bool

    def as_dict(self) -> dict:
        return {
            "epsilon_source": self.epsilon_source,
            "epsilon_omega": self.epsilon_omega,
            "trials": self.trials,
            "max_error": self.max_error,
            "bound": self.bound,
            "holds": self.holds,
        }


BOUND_SLACK = 1e-9


def verify_error_bound(domains, lam, kappa, spec: NoisySpec, trials: int) -> BoundReport:
    """Measure the fused-output L1 error under bounded input noise.

    Per trial: pick an evidence symbol with positive target density,
    perturb each source's exact posterior by at most ``epsilon_source``
    (L1) and the exact conditional weights by at most ``epsilon_omega``,
    fuse, and compare against the brute-force target posterior.  The
    fusion stage is 1-Lipschitz in both inputs, so the error must stay
    below ``epsilon_source + epsilon_omega`` (plus float slack).
    """
    if trials < 1:
        raise InvalidParamError(f"trials must be >= 1, got {trials}")
    lam = simplex.as_prob_vec(lam)
    kappa = check_reference_weights(kappa, len(domains))
    joint = mixture_joint_table(domains, lam)
    target_density = joint.sum(axis=1)
    feasible = np.flatnonzero(target_density > 0.0)
    if feasible.size == 0:
        raise ImpossibleEvidenceError("mixture assigns zero density to every symbol")
    exact_posts = np.stack([exact_posterior_table(d) for d in domains])  # (n, M, K)
    dens = np.stack([d.evidence_marginal() for d in domains])  # (n, M)
    reference = joint / target_density[:, None]

    max_error = 0.0
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, trial]))
        e = int(feasible[rng.integers(feasible.size)])
        conditional = lam * dens[:, e]
        conditional = conditional / conditional.sum()
        noisy_posts = np.stack([
            perturb_prob_vec(exact_posts[k, e], spec.epsilon_source, rng)
            for k in range(len(domains))
        ])
        noisy_omega = perturb_prob_vec(conditional, spec.epsilon_omega, rng)
        fused = fuse_posteriors(noisy_omega, noisy_posts)
        error = float(np.abs(fused - reference[e]).sum())
        if error > max_error:
            max_error = error
    bound = spec.epsilon_source + spec.epsilon_omega + BOUND_SLACK
    return BoundReport(
        epsilon_source=spec.epsilon_source,
        epsilon_omega=spec.epsilon_omega,
        trials=trials,
        max_error=max_error,
        bound=bound,
        holds=max_error <= bound,
    )


# --- mosaic composition --------------------------------------------------------

@dataclass(frozen=True)
class MosaicFrame:
    """Multi-domain frame assembled from four single-domain patches."""

    evidence: np.ndarray
    class_labels: np.ndarray
    domain_labels: np.ndarray

    def __post_init__(self):
        for name in ("evidence", "class_labels", "domain_labels"):
            a = np.asarray(getattr(self, name))
            if a.ndim != 2:
                raise DimensionMismatchError(f"{name} must be 2-D, got shape {a.shape}")
            object.__setattr__(self, name, a)
        if not (self.evidence.shape == self.class_labels.shape == self.domain_labels.shape):
            raise DimensionMismatchError("mosaic grids must share dimensions")


def mosaic_compose(frames, seed: int, split=None) -> MosaicFrame:
    """Quadrant mosaic of four (class_grid, evidence_grid, source_index) frames.

    The split point is drawn uniformly over the middle 50% of each axis
    (extreme splits would degenerate to single-domain frames); pass
    ``split=(row, col)`` to fix it.  Per-pixel domain labels record which
    source each pixel came from.
    """
    if len(frames) != 4:
        raise DimensionMismatchError(f"mosaic needs exactly 4 frames, got {len(frames)}")
    shapes = {np.asarray(f[0]).shape for f in frames} | {np.asarray(f[1]).shape for f in frames}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"frames disagree on dimensions: {sorted(shapes)}")
    h, w = next(iter(shapes))
    if split is None:
        rng = np.random.default_rng(seed)
        r = int(rng.integers(h // 4, h - h // 4))
        c = int(rng.integers(w // 4, w - w // 4))
    else:
        r, c = int(split[0]), int(split[1])
        if not (0 < r < h and 0 < c < w):
            raise InvalidParamError(f"split {split} outside grid interior {h}x{w}")

    evidence = np.empty((h, w), dtype=np.asarray(frames[0][1]).dtype)
    classes = np.empty((h, w), dtype=np.asarray(frames[0][0]).dtype)
    domains = np.empty((h, w), dtype=np.int64)
    quadrants = (
        (slice(0, r), slice(0, c), frames[0]),
        (slice(0, r), slice(c, w), frames[1]),
        (slice(r, h), slice(0, c), frames[2]),
        (slice(r, h), slice(c, w), frames[3]),
    )
    for rows, cols, (class_grid, evidence_grid, source) in quadrants:
        evidence[rows, cols] = np.asarray(evidence_grid)[rows, cols]
        classes[rows, cols] = np.asarray(class_grid)[rows, cols]
        domains[rows, cols] = source
    return MosaicFrame(evidence=evidence, class_labels=classes, domain_labels=domains)
