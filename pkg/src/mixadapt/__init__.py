"""Exact on-the-fly adaptation of posteriors to convex mixtures of source domains."""

from .adaptation import (
    SourceBundle,
    adapt_map,
    adapt_pixel,
    conditional_weights_exact,
    conditional_weights_from_discriminator,
    fuse_posteriors,
    likelihood_mixture_weights,
    mixture_priors,
    plausible_sources,
    uniform_weights,
)
from .heuristics import (
    heuristic_linear_combination,
    heuristic_random_selection,
    heuristic_source_model,
    selection_draws,
)
from .oracle import (
    BoundReport,
    DiscreteDomain,
    MosaicFrame,
    NoisySpec,
    brute_force_target_posterior,
    exact_discriminator,
    exact_posterior,
    generate_domain,
    mosaic_compose,
    perturb_provider,
    sample_mixture_dataset,
    verify_error_bound,
)
from .simplex import (
    decide_map,
    decide_mle,
    normalize,
    simplex_embed,
    simplex_project,
    target_shift,
)

__version__ = "0.1.0"

__all__ = [
    "SourceBundle",
    "adapt_map",
    "adapt_pixel",
    "conditional_weights_exact",
    "conditional_weights_from_discriminator",
    "fuse_posteriors",
    "likelihood_mixture_weights",
    "mixture_priors",
    "plausible_sources",
    "uniform_weights",
    "heuristic_linear_combination",
    "heuristic_random_selection",
    "heuristic_source_model",
    "selection_draws",
    "BoundReport",
    "DiscreteDomain",
    "MosaicFrame",
    "NoisySpec",
    "brute_force_target_posterior",
    "exact_discriminator",
    "exact_posterior",
    "generate_domain",
    "mosaic_compose",
    "perturb_provider",
    "sample_mixture_dataset",
    "verify_error_bound",
    "decide_map",
    "decide_mle",
    "normalize",
    "simplex_embed",
    "simplex_project",
    "target_shift",
    "__version__",
]
