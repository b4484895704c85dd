"""Request handlers: one function per endpoint, shared with the CLI.

Handlers take a request model and return a response model; they raise
package exceptions, which the app (or the CLI) translates into status
codes (or exit codes).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import __version__, bench, runner, simulate
from ..adaptation import (
    SourceBundle,
    adapt_pixel,
    conditional_weights_from_discriminator,
    fuse_posteriors,
    mixture_priors,
)
from ..simplex import decide_map, decide_mle, normalize, target_shift
from . import schemas


def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


def handle_normalize(req: schemas.NormalizeRequest) -> schemas.ProbVecResponse:
    return schemas.ProbVecResponse(values=[float(v) for v in normalize(req.values)])


def handle_target_shift(req: schemas.TargetShiftRequest) -> schemas.ProbVecResponse:
    shifted = target_shift(req.posterior, req.from_priors, req.to_priors)
    return schemas.ProbVecResponse(values=[float(v) for v in shifted])


def handle_fuse(req: schemas.FuseRequest) -> schemas.ProbVecResponse:
    fused = fuse_posteriors(req.omega, req.posteriors)
    return schemas.ProbVecResponse(values=[float(v) for v in fused])


def handle_conditional_weights(req: schemas.ConditionalWeightsRequest) -> schemas.ProbVecResponse:
    omega = conditional_weights_from_discriminator(
        req.mixture_weights, req.reference_weights, req.discriminator
    )
    return schemas.ProbVecResponse(values=[float(v) for v in omega])


def handle_adapt_pixel(req: schemas.AdaptPixelRequest) -> schemas.AdaptPixelResponse:
    bundle = SourceBundle(train_priors=np.asarray(req.train_priors),
                          true_priors=np.asarray(req.true_priors))
    fused = adapt_pixel(req.star_posteriors, bundle, req.discriminator,
                        req.mixture_weights, req.reference_weights)
    mix = mixture_priors(bundle, req.mixture_weights)
    return schemas.AdaptPixelResponse(
        posterior=[float(v) for v in fused],
        map_decision=decide_map(fused),
        mle_decision=decide_mle(fused, mix),
    )


def handle_adapt(req: schemas.AdaptRequest) -> schemas.AdaptResponse:
    outputs = runner.run_adapt(
        req.manifest,
        req.out_dir,
        lam=req.mixture_weights,
        kappa=req.reference_weights,
        frames=req.frames,
        lambda_schedule=req.lambda_schedule,
        threads=req.threads,
    )
    return schemas.AdaptResponse(
        outputs=[schemas.FrameOutput(frame=o["frame"], fused=o["fused"],
                                     map_labels=o["map_labels"], mle_labels=o["mle_labels"])
                 for o in outputs],
        config=req.model_dump(),
    )


def handle_simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
    result = simulate.run_simulation(
        sources=req.sources,
        classes=req.classes,
        evidence=req.evidence,
        concentration=req.concentration,
        lambda_grid=req.lambda_grid,
        noise_levels=req.noise_levels,
        trials=req.trials,
        seed=req.seed,
        strategy=req.strategy,
    )
    return schemas.SimulateResponse(
        reports=[schemas.MixtureScores(mixture_weights=r.lam, scores=r.scores)
                 for r in result["reports"]],
        bounds=[schemas.BoundRow(**b.as_dict()) for b in result["bounds"]],
        config=result["config"],
    )


def handle_evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
    report = runner.run_evaluate(
        req.predictions_dir, req.groundtruth_dir, req.mixture_weights,
        class_count=req.class_count,
    )
    return schemas.EvaluateResponse(
        report=schemas.MixtureScores(mixture_weights=report.lam, scores=report.scores),
        config=req.model_dump(),
    )


def handle_calibrate(req: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
    if req.manifest is not None:
        result = runner.manifest_calibration(
            req.manifest, req.frames, req.mixture_weights, req.class_index, req.bins
        )
    else:
        result = runner.synthetic_calibration(
            req.sources, req.classes, req.evidence, req.concentration,
            req.samples, req.mixture_weights, req.class_index, req.bins,
            req.seed, suppress_shift=req.suppress_shift,
        )
    curve = result["curve"]
    consistency = result["consistency"]

    curve_path = consistency_path = None
    if req.out_dir is not None:
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        curve_path = out_dir / f"calibration_class{req.class_index}.csv"
        curve_path.write_text(runner.curve_csv(curve))
        consistency_path = out_dir / "prior_consistency.csv"
        consistency_path.write_text(
            runner.consistency_csv(consistency, result["reference_priors"])
        )

    bins = [
        schemas.CalibrationBin(
            midpoint=float(curve.midpoints[i]),
            mean_predicted=None if np.isnan(curve.mean_predicted[i])
            else float(curve.mean_predicted[i]),
            frequency=None if np.isnan(curve.frequencies[i])
            else float(curve.frequencies[i]),
            weight=float(curve.weights[i]),
        )
        for i in range(curve.bin_count)
    ]
    return schemas.CalibrateResponse(
        class_index=req.class_index,
        bins=bins,
        prior_deltas=[float(v) for v in consistency.deltas],
        max_abs_delta=consistency.max_abs_delta,
        reliability_ok=result["reliability_ok"],
        sample_count=result["sample_count"],
        curve_csv=str(curve_path) if curve_path else None,
        consistency_csv=str(consistency_path) if consistency_path else None,
        config=req.model_dump(),
    )


def handle_bench(req: schemas.BenchRequest) -> schemas.BenchResponse:
    report = bench.run_bench(
        height=req.height, width=req.width, classes=req.classes,
        sources=req.sources, frames=req.frames, threads=req.threads, seed=req.seed,
    )
    return schemas.BenchResponse(
        mean_ms=report.mean_ms,
        p95_ms=report.p95_ms,
        min_ms=report.min_ms,
        max_ms=report.max_ms,
        config=req.model_dump(),
    )
