"""Request/response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from pydantic import BaseModel, Field

SCHEMA_VERSION = 1


class HealthResponse(BaseModel):
    status: str
    version: str


# --- array-level operations -------------------------------------------------

class NormalizeRequest(BaseModel):
    values: list[float]


class ProbVecResponse(BaseModel):
    values: list[float]


class TargetShiftRequest(BaseModel):
    posterior: list[float]
    from_priors: list[float]
    to_priors: list[float]


class FuseRequest(BaseModel):
    omega: list[float]
    posteriors: list[list[float]]


class ConditionalWeightsRequest(BaseModel):
    mixture_weights: list[float]
    reference_weights: list[float]
    discriminator: list[float]


class AdaptPixelRequest(BaseModel):
    star_posteriors: list[list[float]]
    train_priors: list[list[float]]
    true_priors: list[list[float]]
    discriminator: list[float]
    mixture_weights: list[float]
    reference_weights: list[float] | None = None


class AdaptPixelResponse(BaseModel):
    posterior: list[float]
    map_decision: int
    mle_decision: int


# --- manifest adaptation ------------------------------------------------------

class AdaptRequest(BaseModel):
    manifest: str
    mixture_weights: list[float] | None = None
    reference_weights: list[float] | None = None
    frames: list[int] = Field(default_factory=lambda: [0])
    lambda_schedule: str | None = None  # CSV with one weight row per frame
    out_dir: str
    threads: int = 1


class FrameOutput(BaseModel):
    frame: int
    fused: str
    map_labels: str
    mle_labels: str


class AdaptResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    outputs: list[FrameOutput]
    config: dict


# --- simulation -----------------------------------------------------------------

class SimulateRequest(BaseModel):
    sources: int = 4
    classes: int = 4
    evidence: int = 32
    concentration: float = 1.0
    lambda_grid: str | list[list[float]] = "equal"
    noise_levels: list[float] = Field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.5])
    trials: int = 200
    seed: int = 0
    strategy: str = "map"


class MixtureScores(BaseModel):
    mixture_weights: list[float]
    scores: dict[str, dict[str, float]]


class BoundRow(BaseModel):
    epsilon_source: float
    epsilon_omega: float
    trials: int
    max_error: float
    bound: float
    holds: bool


class SimulateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    reports: list[MixtureScores]
    bounds: list[BoundRow]
    config: dict


# --- file evaluation --------------------------------------------------------------

class EvaluateRequest(BaseModel):
    predictions_dir: str
    groundtruth_dir: str
    mixture_weights: list[float]
    class_count: int | None = None


class EvaluateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    report: MixtureScores
    config: dict


# --- calibration ---------------------------------------------------------------------

class CalibrateRequest(BaseModel):
    manifest: str | None = None
    frames: list[int] = Field(default_factory=lambda: [0])
    sources: int = 2
    classes: int = 3
    evidence: int = 32
    concentration: float = 1.0
    samples: int = 100_000
    mixture_weights: list[float] | None = None
    class_index: int = 0
    bins: int = 10
    seed: int = 0
    suppress_shift: bool = False
    out_dir: str | None = None


class CalibrationBin(BaseModel):
    midpoint: float
    mean_predicted: float | None
    frequency: float | None
    weight: float


class CalibrateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    class_index: int
    bins: list[CalibrationBin]
    prior_deltas: list[float]
    max_abs_delta: float
    reliability_ok: bool
    sample_count: int
    curve_csv: str | None
    consistency_csv: str | None
    config: dict


# --- benchmarking -----------------------------------------------------------------------

class BenchRequest(BaseModel):
    height: int = 720
    width: int = 1280
    classes: int = 4
    sources: int = 4
    frames: int = 10
    threads: int = 1
    seed: int = 0


class BenchResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    mean_ms: float
    p95_ms: float
    min_ms: float
    max_ms: float
    config: dict


class ErrorResponse(BaseModel):
    error: str
    detail: str
