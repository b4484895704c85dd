"""Bit-exact binary tensor files and JSON manifests.

The MDAT container is a deliberately dumb dense format so external model
stacks can export posterior and discriminator maps without a serialization
dependency.  Byte layout (all little-endian, regardless of host):

    offset  size        field
    0       4           magic, ASCII "MDAT"
    4       2           format version, uint16 (currently 1)
    6       1           dtype code, uint8: 1 = float32, 2 = float64
    7       1           rank, uint8, 1..4
    8       4 * rank    dims, uint32 each
    ...     prod(dims) * itemsize   payload, row-major

A manifest JSON wires per-source priors and map path templates together;
``{frame}`` in a template is substituted with the frame index.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import simplex
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    DimOverflowError,
    InvariantViolationError,
    MissingFileError,
    NegativeMassError,
    NotNormalizedError,
    SchemaError,
    TensorFormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

MAGIC = b"MDAT"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}
MAX_RANK = 4
_DIM_LIMIT = 2 ** 32


def write_tensor(path, array) -> None:
    """Write an array as MDAT; dtype must be float32 or float64."""
    a = np.asarray(array)
    code = _DTYPE_CODES.get(a.dtype)
    if code is None:
        raise TensorFormatError(f"unsupported dtype {a.dtype}; use float32 or float64")
    if not 1 <= a.ndim <= MAX_RANK:
        raise TensorFormatError(f"rank must be in [1, {MAX_RANK}], got {a.ndim}")
    if any(d >= _DIM_LIMIT for d in a.shape) or a.size >= _DIM_LIMIT:
        raise DimOverflowError(f"dims {a.shape} exceed the 32-bit limit")
    header = struct.pack(f"<4sHBB{a.ndim}I", MAGIC, VERSION, code, a.ndim, *a.shape)
    payload = np.ascontiguousarray(a).astype(_DTYPES[code], copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path) -> np.ndarray:
    """Read an MDAT file back into an array; inverse of :func:`write_tensor`."""
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise MissingFileError(str(e)) from e
    if len(blob) < 8:
        raise TruncatedPayloadError(f"{path}: file shorter than the fixed header")
    magic, version, code, rank = struct.unpack_from("<4sHBB", blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}, reader supports {VERSION}")
    if code not in _DTYPES:
        raise TensorFormatError(f"{path}: unknown dtype code {code}")
    if not 1 <= rank <= MAX_RANK:
        raise TensorFormatError(f"{path}: rank {rank} outside [1, {MAX_RANK}]")
    header_size = 8 + 4 * rank
    if len(blob) < header_size:
        raise TruncatedPayloadError(f"{path}: header truncated before dims")
    dims = struct.unpack_from(f"<{rank}I", blob, 8)
    count = 1
    for d in dims:
        count *= d
    if count >= _DIM_LIMIT:
        raise DimOverflowError(f"{path}: dims {dims} product exceeds the 32-bit limit")
    dtype = _DTYPES[code]
    expected = header_size + count * dtype.itemsize
    if len(blob) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(blob) - header_size} bytes, "
            f"dims {dims} require {count * dtype.itemsize}"
        )
    return np.frombuffer(blob, dtype=dtype, offset=header_size).reshape(dims).copy()


def resolve_template(template: str, frame: int) -> str:
    return template.replace("{frame}", str(frame))


# --- manifests ---------------------------------------------------------------------

@dataclass(frozen=True)
class SourceEntry:
    id: str
    train_priors: np.ndarray
    true_priors: np.ndarray
    posterior_map: str


@dataclass(frozen=True)
class Manifest:
    """Wiring for one adaptation run: sources, discriminator, reference weights."""

    class_count: int
    source_count: int
    sources: tuple[SourceEntry, ...]
    discriminator_map: str
    kappa: np.ndarray
    lam: np.ndarray | None
    groundtruth_map: str | None
    root: Path

    def posterior_path(self, k: int, frame: int) -> Path:
        return self.root / resolve_template(self.sources[k].posterior_map, frame)

    def discriminator_path(self, frame: int) -> Path:
        return self.root / resolve_template(self.discriminator_map, frame)

    def groundtruth_path(self, frame: int) -> Path:
        if self.groundtruth_map is None:
            raise SchemaError("manifest declares no groundtruth template")
        return self.root / resolve_template(self.groundtruth_map, frame)


def _require(obj: dict, key: str, kind, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}: missing required field")
    value = obj[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise SchemaError(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _check_prob_field(values, length: int, path: str, strictly_positive: bool = False) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size != length:
        raise InvariantViolationError(f"{path}: expected {length} entries, got shape {arr.shape}")
    for j, v in enumerate(arr):
        if v < 0.0:
            raise InvariantViolationError(f"{path}[{j}]: negative entry {v!r}")
        if strictly_positive and v == 0.0:
            raise InvariantViolationError(f"{path}[{j}]: must be strictly positive")
    try:
        return simplex.as_prob_vec(arr)
    except NotNormalizedError as e:
        raise InvariantViolationError(f"{path}: {e}") from e


def read_manifest(path) -> Manifest:
    """Parse and invariant-check a manifest JSON file.

    Malformed structure raises :class:`SchemaError`; structurally valid
    but inconsistent contents raise :class:`InvariantViolationError`
    naming the offending field path.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise MissingFileError(str(e)) from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be an object")

    class_count = _require(raw, "class_count", int, "manifest")
    source_count = _require(raw, "source_count", int, "manifest")
    if class_count < 1:
        raise InvariantViolationError("class_count: must be >= 1")
    if source_count < 1:
        raise InvariantViolationError("source_count: must be >= 1")
    sources_raw = _require(raw, "sources", list, "manifest")
    if len(sources_raw) != source_count:
        raise InvariantViolationError(
            f"sources: {len(sources_raw)} entries, source_count says {source_count}"
        )
    sources = []
    for k, entry in enumerate(sources_raw):
        if not isinstance(entry, dict):
            raise SchemaError(f"sources[{k}]: expected an object")
        prefix = f"sources[{k}]"
        sid = _require(entry, "id", str, prefix)
        train = _check_prob_field(
            _require(entry, "train_priors", list, prefix),
            class_count, f"{prefix}.train_priors", strictly_positive=True,
        )
        true = _check_prob_field(
            _require(entry, "true_priors", list, prefix),
            class_count, f"{prefix}.true_priors",
        )
        template = _require(entry, "posterior_map", str, prefix)
        sources.append(SourceEntry(id=sid, train_priors=train, true_priors=true,
                                   posterior_map=template))

    disc_template = _require(raw, "discriminator_map", str, "manifest")
    kappa = _check_prob_field(_require(raw, "kappa", list, "manifest"),
                              source_count, "kappa", strictly_positive=True)
    lam = None
    if raw.get("lambda") is not None:
        lam = _check_prob_field(raw["lambda"], source_count, "lambda")
    gt_template = raw.get("groundtruth_map")
    if gt_template is not None and not isinstance(gt_template, str):
        raise SchemaError("manifest.groundtruth_map: expected string")
    return Manifest(
        class_count=class_count,
        source_count=source_count,
        sources=tuple(sources),
        discriminator_map=disc_template,
        kappa=kappa,
        lam=lam,
        groundtruth_map=gt_template,
        root=path.parent,
    )


SPOT_CHECK_PIXELS = 1024
SPOT_CHECK_TOLERANCE = 1e-4


def _spot_check(data: np.ndarray, label: str, rng: np.random.Generator) -> None:
    flat = data.reshape(-1, data.shape[-1])
    n = min(SPOT_CHECK_PIXELS, flat.shape[0])
    idx = rng.choice(flat.shape[0], size=n, replace=False)
    sample = flat[idx]
    # predicates are written NaN-hostile: a NaN never satisfies <=
    ok_entries = sample >= -1e-7
    if not np.all(ok_entries):
        row, col = np.argwhere(~ok_entries)[0]
        raise InvariantViolationError(
            f"{label}: pixel {int(idx[row])} channel {int(col)} is {sample[row, col]!r}"
        )
    sums = sample.sum(axis=1)
    within = np.abs(sums - 1.0) <= SPOT_CHECK_TOLERANCE
    if not np.all(within):
        bad = int(np.flatnonzero(~within)[0])
        raise InvariantViolationError(
            f"{label}: pixel {int(idx[bad])} sums to {sums[bad]!r}"
        )


def validate_manifest(manifest: Manifest, frames=(0,), seed: int = 0) -> list[str]:
    """Cross-check on-disk tensors against the manifest.

    Verifies map shapes against the declared class/source counts and
    spot-checks per-pixel normalization on a sampled pixel subset.
    Returns one diagnostic line per check performed; raises on violation.
    """
    rng = np.random.default_rng(seed)
    notes = []
    for frame in frames:
        shape = None
        for k in range(manifest.source_count):
            path = manifest.posterior_path(k, frame)
            if not path.exists():
                raise MissingFileError(f"sources[{k}] frame {frame}: {path} does not exist")
            data = read_tensor(path)
            if data.ndim != 3 or data.shape[2] != manifest.class_count:
                raise DimensionMismatchError(
                    f"sources[{k}] frame {frame}: shape {data.shape}, "
                    f"expected (H, W, {manifest.class_count})"
                )
            if shape is None:
                shape = data.shape[:2]
            elif data.shape[:2] != shape:
                raise DimensionMismatchError(
                    f"sources[{k}] frame {frame}: grid {data.shape[:2]} differs from {shape}"
                )
            _spot_check(data.astype(np.float64), f"sources[{k}] frame {frame}", rng)
            notes.append(f"sources[{k}] frame {frame}: {data.shape} ok")
        disc_path = manifest.discriminator_path(frame)
        if not disc_path.exists():
            raise MissingFileError(f"discriminator frame {frame}: {disc_path} does not exist")
        disc = read_tensor(disc_path)
        if disc.ndim != 3 or disc.shape != (*shape, manifest.source_count):
            raise DimensionMismatchError(
                f"discriminator frame {frame}: shape {disc.shape}, "
                f"expected ({shape[0]}, {shape[1]}, {manifest.source_count})"
            )
        _spot_check(disc.astype(np.float64), f"discriminator frame {frame}", rng)
        notes.append(f"discriminator frame {frame}: {disc.shape} ok")
    return notes


def load_prob_map(path) -> np.ndarray:
    """Read a dense probability map into float64 and renormalize per pixel.

    float32 exports accumulate rounding in the channel sums; sums within
    1e-6 of 1 are renormalized, larger deviations raise.
    """
    data = read_tensor(path).astype(np.float64)
    if data.ndim != 3:
        raise DimensionMismatchError(f"{path}: expected (H, W, C), got shape {data.shape}")
    negative = data < -simplex.NEGATIVE_CLAMP
    if np.any(negative):
        r, c, ch = np.argwhere(negative)[0]
        raise NegativeMassError(
            f"{path}: pixel ({r}, {c}) channel {ch} is {data[r, c, ch]!r}"
        )
    data = np.where(data < 0.0, 0.0, data)
    sums = data.sum(axis=-1)
    within = np.abs(sums - 1.0) <= simplex.SUM_TOLERANCE
    if not np.all(within):
        r, c = np.argwhere(~within)[0]
        raise NotNormalizedError(
            f"{path}: pixel ({r}, {c}) sums to {sums[r, c]!r}, beyond {simplex.SUM_TOLERANCE}"
        )
    return data / sums[..., None]
