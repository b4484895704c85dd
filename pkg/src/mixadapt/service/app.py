"""FastAPI application wiring the handlers to versioned routes."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..errors import InputError, MixAdaptError
from . import handlers, schemas


def create_app() -> FastAPI:
    app = FastAPI(
        title="mixadapt",
        description="On-the-fly posterior adaptation for convex mixtures of source domains",
    )

    @app.exception_handler(MixAdaptError)
    async def package_error(request, exc: MixAdaptError):
        status = 422 if isinstance(exc, InputError) else 400
        payload = schemas.ErrorResponse(error=type(exc).__name__, detail=str(exc))
        return JSONResponse(status_code=status, content=payload.model_dump())

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return handlers.health()

    @app.post("/v1/simplex/normalize", response_model=schemas.ProbVecResponse)
    def normalize(req: schemas.NormalizeRequest):
        return handlers.handle_normalize(req)

    @app.post("/v1/simplex/target-shift", response_model=schemas.ProbVecResponse)
    def target_shift(req: schemas.TargetShiftRequest):
        return handlers.handle_target_shift(req)

    @app.post("/v1/adaptation/fuse", response_model=schemas.ProbVecResponse)
    def fuse(req: schemas.FuseRequest):
        return handlers.handle_fuse(req)

    @app.post("/v1/adaptation/conditional-weights", response_model=schemas.ProbVecResponse)
    def conditional_weights(req: schemas.ConditionalWeightsRequest):
        return handlers.handle_conditional_weights(req)

    @app.post("/v1/adaptation/pixel", response_model=schemas.AdaptPixelResponse)
    def adapt_pixel(req: schemas.AdaptPixelRequest):
        return handlers.handle_adapt_pixel(req)

    @app.post("/v1/adapt", response_model=schemas.AdaptResponse)
    def adapt(req: schemas.AdaptRequest):
        return handlers.handle_adapt(req)

    @app.post("/v1/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        return handlers.handle_simulate(req)

    @app.post("/v1/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest):
        return handlers.handle_evaluate(req)

    @app.post("/v1/calibrate", response_model=schemas.CalibrateResponse)
    def calibrate(req: schemas.CalibrateRequest):
        return handlers.handle_calibrate(req)

    @app.post("/v1/bench", response_model=schemas.BenchResponse)
    def run_bench(req: schemas.BenchRequest):
        return handlers.handle_bench(req)

    return app


app = create_app()
