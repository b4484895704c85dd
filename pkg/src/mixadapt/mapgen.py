"""Dense map construction from discrete domains.

Turns a synthetic instance into the same artifacts an external model
stack would export: per-source posterior maps, a discriminator map, and
groundtruth label maps, optionally written as an on-disk manifest
fixture.  Used by the benchmark, the calibration harness, and tests.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import oracle
from .adaptation import SourceBundle
from .mdat import write_tensor


def frame_maps_from_evidence(domains, bundle: SourceBundle, kappa, evidence_grid):
    """Star posterior maps and discriminator map for one evidence grid.

    Returns ``(star_maps (n, H, W, K), disc_map (H, W, n))`` computed by
    exact table lookup, so the maps are what perfectly trained models
    would output.
    """
    evidence = np.asarray(evidence_grid)
    star_tables = np.stack([
        oracle.star_posterior_table(d, bundle.train_priors[k])
        for k, d in enumerate(domains)
    ])  # (n, M, K)
    disc_table = oracle.exact_discriminator_table(domains, kappa)  # (M, n)
    # mixed basic/advanced indexing yields a transposed view; the dense
    # kernel wants contiguous rows, so materialize them here once
    star_maps = np.ascontiguousarray(star_tables[:, evidence, :])
    disc_map = np.ascontiguousarray(disc_table[evidence, :])
    return star_maps, disc_map


def sample_mixture_frame(domains, lam, height: int, width: int, seed: int):
    """Per-pixel mixture draw: (evidence, class_labels, domain_labels) grids."""
    evidence, classes, sources = oracle.sample_mixture_dataset(
        domains, lam, height * width, seed
    )
    return (evidence.reshape(height, width),
            classes.reshape(height, width),
            sources.reshape(height, width))


def write_fixture_manifest(out_dir, domains, kappa, lam, frames: int,
                           height: int, width: int, seed: int,
                           dtype=np.float32, bundle: SourceBundle | None = None) -> Path:
    """Write a complete manifest fixture with per-frame maps and groundtruth.

    Frames are sampled from the lambda-mixture; maps are exact-model
    outputs exported at the requested dtype (float32 by default, matching
    what real pipelines ship).  Returns the manifest path.
    """
    out_dir = Path(out_dir)
    (out_dir / "maps").mkdir(parents=True, exist_ok=True)
    if bundle is None:
        bundle = oracle.source_bundle(domains)
    kappa = np.asarray(kappa, dtype=np.float64)

    for frame in range(frames):
        frame_seed = int(np.random.SeedSequence([seed, frame]).generate_state(1)[0])
        evidence, classes, _ = sample_mixture_frame(domains, lam, height, width, frame_seed)
        star_maps, disc_map = frame_maps_from_evidence(domains, bundle, kappa, evidence)
        for k in range(len(domains)):
            write_tensor(out_dir / "maps" / f"src{k}_{frame}.mdat", star_maps[k].astype(dtype))
        write_tensor(out_dir / "maps" / f"disc_{frame}.mdat", disc_map.astype(dtype))
        write_tensor(out_dir / "maps" / f"gt_{frame}.mdat", classes.astype(np.float32))
        write_tensor(out_dir / "maps" / f"evidence_{frame}.mdat",
                     evidence.astype(np.float32))

    manifest = {
        "class_count": int(domains[0].class_count),
        "source_count": len(domains),
        "kappa": [float(v) for v in kappa],
        "lambda": [float(v) for v in np.asarray(lam, dtype=np.float64)],
        "sources": [
            {
                "id": f"domain-{k}",
                "train_priors": [float(v) for v in bundle.train_priors[k]],
                "true_priors": [float(v) for v in bundle.true_priors[k]],
                "posterior_map": f"maps/src{k}_{{frame}}.mdat",
            }
            for k in range(len(domains))
        ],
        "discriminator_map": "maps/disc_{frame}.mdat",
        "groundtruth_map": "maps/gt_{frame}.mdat",
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def synthetic_bench_maps(height: int, width: int, classes: int, sources: int, seed: int):
    """Deterministic dense workload for throughput measurements."""
    domains = [
        oracle.generate_domain(classes, max(classes * 8, 32), 1.0,
                               int(np.random.SeedSequence([seed, k]).generate_state(1)[0]))
        for k in range(sources)
    ]
    bundle = oracle.source_bundle(domains)
    kappa = np.full(sources, 1.0 / sources)
    evidence, _, _ = sample_mixture_frame(
        domains, np.full(sources, 1.0 / sources), height, width, seed
    )
    star_maps, disc_map = frame_maps_from_evidence(domains, bundle, kappa, evidence)
    return star_maps, disc_map, bundle, kappa
