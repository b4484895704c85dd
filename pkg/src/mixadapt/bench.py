"""Throughput measurement for the dense adaptation kernel."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .adaptation import adapt_map
from .errors import InvalidParamError
from .mapgen import synthetic_bench_maps


@dataclass(frozen=True)
class BenchReport:
    height: int
    width: int
    classes: int
    sources: int
    frames: int
    threads: int
    mean_ms: float
    p95_ms: float
    min_ms: float
    max_ms: float

    def as_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "classes": self.classes,
            "sources": self.sources,
            "frames": self.frames,
            "threads": self.threads,
            "mean_ms": self.mean_ms,
            "p95_ms": self.p95_ms,
            "min_ms": self.min_ms,
            "max_ms": self.max_ms,
        }


def run_bench(height: int = 720, width: int = 1280, classes: int = 4, sources: int = 4,
              frames: int = 10, threads: int = 1, seed: int = 0,
              warmup: int = 1) -> BenchReport:
    """Time ``adapt_map`` on a deterministic synthetic workload.

    A warmup pass absorbs one-time JIT compilation before timing starts.
    """
    if min(height, width, classes, sources, frames) < 1:
        raise InvalidParamError("all bench dimensions must be positive")
    star_maps, disc_map, bundle, kappa = synthetic_bench_maps(
        height, width, classes, sources, seed
    )
    lam = np.full(sources, 1.0 / sources)
    for _ in range(warmup):
        adapt_map(star_maps, bundle, disc_map, lam, kappa, threads=threads)
    timings = []
    for _ in range(frames):
        start = time.perf_counter()
        adapt_map(star_maps, bundle, disc_map, lam, kappa, threads=threads)
        timings.append((time.perf_counter() - start) * 1000.0)
    timings = np.asarray(timings)
    return BenchReport(
        height=height, width=width, classes=classes, sources=sources,
        frames=frames, threads=threads,
        mean_ms=float(timings.mean()),
        p95_ms=float(np.percentile(timings, 95)),
        min_ms=float(timings.min()),
        max_ms=float(timings.max()),
    )
