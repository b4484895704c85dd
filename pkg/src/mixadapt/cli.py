"""Command-line client for the adaptation service.

Each subcommand builds the same request model the HTTP service accepts
and dispatches it either in-process (default) or to a running server via
``--server http://host:port``.  Exit codes: 0 on success, 2 on validation
or input errors, 3 on runtime numerical errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import InputError, MixAdaptError, NumericalError
from .metrics import CSV_HEADER, SCORE_NAMES
from .service import handlers, schemas


def parse_weights(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as e:
        raise InputError(f"cannot parse weights {text!r}: {e}") from e
    if not values:
        raise InputError(f"no weights in {text!r}")
    return values


def parse_frames(text: str) -> list[int]:
    """Frame selections like ``0``, ``0,3,7``, or ``0..9``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip() != ""]


def _dispatch(server: str | None, route: str, request, handler, response_model):
    if server is None:
        return handler(request)
    import httpx

    response = httpx.post(f"{server.rstrip('/')}/v1/{route}",
                          json=request.model_dump(), timeout=600.0)
    if response.status_code != 200:
        detail = response.json()
        name = detail.get("error", "MixAdaptError")
        message = detail.get("detail", response.text)
        if response.status_code == 400:
            raise NumericalError(f"{name}: {message}")
        raise InputError(f"{name}: {message}")
    return response_model.model_validate(response.json())


def _emit(payload: dict, fmt: str, out: str | None, csv_text: str | None = None):
    if fmt == "csv" and csv_text is not None:
        text = csv_text
    else:
        text = json.dumps(payload, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        print(f"wrote {out}")


def _scores_csv(rows: list[schemas.MixtureScores]) -> str:
    lines = [",".join(CSV_HEADER)]
    for row in rows:
        lam = " ".join(f"{v:.6g}" for v in row.mixture_weights)
        for method in sorted(row.scores):
            s = row.scores[method]
            lines.append(",".join([method, lam] + [f"{s[n]:.10g}" for n in SCORE_NAMES]))
    return "\n".join(lines) + "\n"


def cmd_adapt(args) -> int:
    request = schemas.AdaptRequest(
        manifest=args.manifest,
        mixture_weights=parse_weights(args.weights) if args.weights else None,
        reference_weights=parse_weights(args.kappa) if args.kappa else None,
        frames=parse_frames(args.frames),
        lambda_schedule=args.lambda_schedule,
        out_dir=args.out,
        threads=args.threads,
    )
    response = _dispatch(args.server, "adapt", request, handlers.handle_adapt,
                         schemas.AdaptResponse)
    _emit(response.model_dump(), "json", None)
    return 0


def cmd_simulate(args) -> int:
    grid = args.lambda_grid
    if grid not in ("equal", "sweep"):
        grid = [parse_weights(part) for part in grid.split(";")]
    request = schemas.SimulateRequest(
        sources=args.sources,
        classes=args.classes,
        evidence=args.evidence,
        concentration=args.concentration,
        lambda_grid=grid,
        noise_levels=[float(v) for v in args.noise.split(",")] if args.noise else [],
        trials=args.trials,
        seed=args.seed,
        strategy=args.strategy,
    )
    response = _dispatch(args.server, "simulate", request, handlers.handle_simulate,
                         schemas.SimulateResponse)
    _emit(response.model_dump(), args.format, args.out, _scores_csv(response.reports))
    return 0


def cmd_evaluate(args) -> int:
    request = schemas.EvaluateRequest(
        predictions_dir=args.predictions,
        groundtruth_dir=args.groundtruth,
        mixture_weights=parse_weights(args.weights),
        class_count=args.classes,
    )
    response = _dispatch(args.server, "evaluate", request, handlers.handle_evaluate,
                         schemas.EvaluateResponse)
    _emit(response.model_dump(), args.format, args.out, _scores_csv([response.report]))
    return 0


def cmd_calibrate(args) -> int:
    request = schemas.CalibrateRequest(
        manifest=args.manifest,
        frames=parse_frames(args.frames),
        sources=args.sources,
        classes=args.classes,
        evidence=args.evidence,
        concentration=args.concentration,
        samples=args.samples,
        mixture_weights=parse_weights(args.weights) if args.weights else None,
        class_index=args.class_index,
        bins=args.bins,
        seed=args.seed,
        suppress_shift=args.suppress_shift,
        out_dir=args.out,
    )
    response = _dispatch(args.server, "calibrate", request, handlers.handle_calibrate,
                         schemas.CalibrateResponse)
    _emit(response.model_dump(), "json", None)
    return 0


def cmd_bench(args) -> int:
    request = schemas.BenchRequest(
        height=args.height, width=args.width, classes=args.classes,
        sources=args.sources, frames=args.frames, threads=args.threads, seed=args.seed,
    )
    response = _dispatch(args.server, "bench", request, handlers.handle_bench,
                         schemas.BenchResponse)
    _emit(response.model_dump(), "json", args.out)
    return 0


def cmd_fixture(args) -> int:
    import numpy as np

    from . import mapgen, oracle

    domains = [
        oracle.generate_domain(
            args.classes, args.evidence, args.concentration,
            int(np.random.SeedSequence([args.seed, k]).generate_state(1)[0]),
        )
        for k in range(args.sources)
    ]
    lam = (parse_weights(args.weights) if args.weights
           else [1.0 / args.sources] * args.sources)
    kappa = [1.0 / args.sources] * args.sources
    path = mapgen.write_fixture_manifest(
        args.out, domains, kappa, lam, frames=args.frames_count,
        height=args.height, width=args.width, seed=args.seed,
    )
    print(f"wrote {path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixadapt",
        description="Adapt per-source posteriors to convex mixtures of source domains.",
    )
    parser.add_argument("--server", default=None,
                        help="dispatch to a running service instead of in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adapt", help="fuse posterior maps from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--weights", default=None, help="comma-separated mixture weights")
    p.add_argument("--kappa", default=None, help="override reference weights")
    p.add_argument("--frames", default="0", help="e.g. 0, 0,2,4 or 0..9")
    p.add_argument("--lambda-schedule", default=None,
                   help="CSV of per-frame weights: frame,w0,w1,...")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("simulate", help="score the pipeline against heuristics on synthetic domains")
    p.add_argument("--sources", type=int, default=4)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--evidence", type=int, default=32)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--lambda-grid", default="equal",
                   help='"equal", "sweep", or explicit "0.5,0.5;1,0"')
    p.add_argument("--noise", default="0,0.05,0.1,0.2,0.5",
                   help="comma-separated noise levels for bound verification")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=["map", "mle"], default="map")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score prediction directories against groundtruth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--groundtruth", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="emit reliability bins and prior-consistency tables")
    p.add_argument("--manifest", default=None)
    p.add_argument("--frames", default="0")
    p.add_argument("--sources", type=int, default=2)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--evidence", type=int, default=32)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--weights", default=None)
    p.add_argument("--class-index", type=int, default=0)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--suppress-shift", action="store_true",
                   help="negative control: skip the per-source prior correction")
    p.add_argument("--out", default=None, help="directory for the CSV outputs")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bench", help="measure dense-map throughput")
    p.add_argument("--height", type=int, default=720)
    p.add_argument("--width", type=int, default=1280)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--sources", type=int, default=4)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixture", help="generate a synthetic manifest fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--sources", type=int, default=4)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--evidence", type=int, default=32)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--weights", default=None)
    p.add_argument("--frames-count", type=int, default=1)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    from pydantic import ValidationError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, ValidationError) as e:
        print(f"error ({type(e).__name__}): {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"error ({type(e).__name__}): {e}", file=sys.stderr)
        return 3
    except MixAdaptError as e:
        print(f"error ({type(e).__name__}): {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
