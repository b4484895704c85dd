"""File-facing runs: manifest adaptation, directory evaluation, calibration.

These functions do the heavy lifting for both the HTTP service and the
CLI; everything they produce is deterministic given their arguments.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from . import metrics, oracle
from .adaptation import (
    SourceBundle,
    adapt_map,
    check_mixture_weights,
    check_reference_weights,
    mixture_priors,
)
from .errors import (
    DimensionMismatchError,
    InvalidParamError,
    MissingFileError,
    SchemaError,
    ZeroPriorError,
)
from .mdat import Manifest, load_prob_map, read_manifest, read_tensor, write_tensor
from .simulate import ExactInstance, make_instance


def _check_kappa_override(kappa, source_count: int) -> np.ndarray:
    """Validate a user-supplied reference-weight override as input, not math."""
    try:
        return check_reference_weights(kappa, source_count)
    except ZeroPriorError as e:
        raise InvalidParamError(str(e)) from e


def manifest_bundle(manifest: Manifest) -> SourceBundle:
    return SourceBundle(
        train_priors=np.stack([s.train_priors for s in manifest.sources]),
        true_priors=np.stack([s.true_priors for s in manifest.sources]),
    )


def load_frame(manifest: Manifest, frame: int):
    """Star maps (n, H, W, K) and discriminator map (H, W, n) for one frame."""
    star_maps = np.stack([
        load_prob_map(manifest.posterior_path(k, frame))
        for k in range(manifest.source_count)
    ])
    disc_map = load_prob_map(manifest.discriminator_path(frame))
    if disc_map.shape != (*star_maps.shape[1:3], manifest.source_count):
        raise DimensionMismatchError(
            f"frame {frame}: discriminator {disc_map.shape} vs posterior grid "
            f"{star_maps.shape[1:3]} with {manifest.source_count} sources"
        )
    return star_maps, disc_map


def read_lambda_schedule(path, source_count: int) -> dict[int, np.ndarray]:
    """Per-frame mixture weights from a CSV of ``frame, w0, w1, ...`` rows."""
    schedule = {}
    try:
        text = Path(path).read_text()
    except FileNotFoundError as e:
        raise MissingFileError(str(e)) from e
    for row in csv.reader(io.StringIO(text)):
        if not row or row[0].strip().startswith("#"):
            continue
        if len(row) != source_count + 1:
            raise SchemaError(f"schedule row {row!r}: expected frame plus {source_count} weights")
        frame = int(row[0])
        schedule[frame] = check_mixture_weights([float(v) for v in row[1:]], source_count)
    return schedule


def decisions_from_posterior_map(fused: np.ndarray, mix_priors: np.ndarray):
    """Vectorized MAP and MLE label maps from a fused posterior map."""
    map_labels = np.argmax(fused, axis=-1)
    ratios = np.zeros_like(fused)
    mass = fused > 0.0
    ratios[mass] = fused[mass] / np.broadcast_to(mix_priors, fused.shape)[mass]
    mle_labels = np.argmax(ratios, axis=-1)
    return map_labels, mle_labels


def run_adapt(manifest_path, out_dir, lam=None, kappa=None, frames=(0,),
              lambda_schedule=None, threads: int = 1) -> list[dict]:
    """Adapt every requested frame of a manifest and write the outputs.

    Writes ``fused_{frame}.mdat`` (float32 posterior map) plus MAP and MLE
    label maps per frame.  ``lambda_schedule`` overrides the mixture
    weights at frame granularity; mid-frame changes are not a thing.
    """
    manifest = read_manifest(manifest_path)
    bundle = manifest_bundle(manifest)
    kappa = manifest.kappa if kappa is None else _check_kappa_override(
        kappa, manifest.source_count
    )
    if lam is None:
        if manifest.lam is None:
            raise SchemaError("no mixture weights: pass them or set lambda in the manifest")
        lam = manifest.lam
    lam = check_mixture_weights(lam, manifest.source_count)
    schedule = {}
    if lambda_schedule is not None:
        schedule = read_lambda_schedule(lambda_schedule, manifest.source_count)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for frame in frames:
        frame_lam = schedule.get(frame, lam)
        star_maps, disc_map = load_frame(manifest, frame)
        fused = adapt_map(star_maps, bundle, disc_map, frame_lam, kappa, threads=threads)
        mix = mixture_priors(bundle, frame_lam)
        map_labels, mle_labels = decisions_from_posterior_map(fused, mix)
        paths = {
            "fused": out_dir / f"fused_{frame}.mdat",
            "map_labels": out_dir / f"map_{frame}.mdat",
            "mle_labels": out_dir / f"mle_{frame}.mdat",
        }
        write_tensor(paths["fused"], fused.astype(np.float32))
        write_tensor(paths["map_labels"], map_labels.astype(np.float32))
        write_tensor(paths["mle_labels"], mle_labels.astype(np.float32))
        outputs.append({"frame": frame, **{k: str(v) for k, v in paths.items()}})
    return outputs


def read_label_map(path) -> np.ndarray:
    labels = read_tensor(path)
    if labels.ndim != 2:
        raise DimensionMismatchError(f"{path}: label maps must be rank 2, got {labels.shape}")
    return np.rint(labels).astype(np.int64)


def _domain_dirs(root: Path) -> list[tuple[int, Path]]:
    dirs = []
    for child in sorted(root.iterdir()):
        if child.is_dir() and child.name.isdigit():
            dirs.append((int(child.name), child))
    if not dirs:
        raise MissingFileError(f"{root}: no per-domain subdirectories (named 0, 1, ...)")
    indices = sorted(idx for idx, _ in dirs)
    if indices != list(range(len(dirs))):
        raise SchemaError(
            f"{root}: domain directories must be named 0..{len(dirs) - 1}, got {indices}"
        )
    return dirs


def run_evaluate(predictions_dir, groundtruth_dir, lam,
                 class_count: int | None = None) -> metrics.EvaluationReport:
    """Weighted scores per method directory.

    Layout: ``groundtruth_dir/<domain>/<name>.mdat`` holds label maps per
    source domain; ``predictions_dir/<method>/<domain>/<name>.mdat``
    mirrors it.  Every pixel of a file under domain k carries weight
    ``lam[k]``, which realizes the weighted test-set mixture.
    """
    gt_root = Path(groundtruth_dir)
    pred_root = Path(predictions_dir)
    if not gt_root.is_dir():
        raise MissingFileError(f"{gt_root} is not a directory")
    if not pred_root.is_dir():
        raise MissingFileError(f"{pred_root} is not a directory")
    domains = _domain_dirs(gt_root)
    lam = check_mixture_weights(lam, len(domains))

    methods = sorted(p.name for p in pred_root.iterdir() if p.is_dir())
    if not methods:
        raise MissingFileError(f"{pred_root}: no method subdirectories")

    # Pair up files and settle the class count before accumulating, so
    # partial matrices all share one shape and merge by addition.
    pairs = {method: [] for method in methods}
    max_label = 0
    for method in methods:
        for domain_idx, gt_dir in domains:
            weight = float(lam[domain_idx])
            if weight == 0.0:
                continue
            gt_files = sorted(gt_dir.glob("*.mdat"))
            if not gt_files:
                raise MissingFileError(f"{gt_dir}: no groundtruth label maps")
            for gt_path in gt_files:
                pred_path = pred_root / method / gt_dir.name / gt_path.name
                if not pred_path.exists():
                    raise MissingFileError(f"{pred_path} missing for groundtruth {gt_path}")
                gt = read_label_map(gt_path)
                pred = read_label_map(pred_path)
                if gt.shape != pred.shape:
                    raise DimensionMismatchError(
                        f"{pred_path}: shape {pred.shape} vs groundtruth {gt.shape}"
                    )
                max_label = max(max_label, int(gt.max()), int(pred.max()))
                pairs[method].append((gt, pred, weight))
    if class_count is None:
        class_count = max_label + 1

    scores = {}
    for method in methods:
        if not pairs[method]:
            raise MissingFileError(f"{pred_root / method}: no overlapping files with groundtruth")
        cm = np.zeros((class_count, class_count))
        for gt, pred, weight in pairs[method]:
            cm += metrics.weighted_confusion(
                gt.ravel(), pred.ravel(), np.full(gt.size, weight), class_count=class_count
            )
        scores[method] = metrics.all_scores(cm)
    return metrics.EvaluationReport(
        lam=[float(v) for v in lam],
        scores=scores,
        metadata={"predictions_dir": str(pred_root), "groundtruth_dir": str(gt_root)},
    )


# --- calibration -----------------------------------------------------------------

def _omega_table(instance: ExactInstance, lam: np.ndarray) -> np.ndarray:
    """(M, n) conditional source weights for every evidence symbol."""
    num = instance.disc_table * (lam / instance.kappa)[None, :]
    return num / num.sum(axis=1, keepdims=True)


def synthetic_calibration(sources: int, classes: int, evidence: int, concentration: float,
                          samples: int, lam, class_index: int, bins: int, seed: int,
                          suppress_shift: bool = False) -> dict:
    """Sampled calibration run against an exact synthetic instance.

    With ``suppress_shift`` the per-source prior correction is skipped
    before fusing, which is the classic miscalibration this harness must
    detect; with it off, the adapted posteriors are exact and the curve
    sits on the diagonal up to sampling noise.
    """
    if samples < 1:
        raise InvalidParamError(f"samples must be >= 1, got {samples}")
    instance = make_instance(sources, classes, evidence, concentration, seed)
    lam = (np.full(sources, 1.0 / sources) if lam is None
           else check_mixture_weights(lam, sources))
    if not 0 <= class_index < classes:
        raise InvalidParamError(f"class {class_index} out of range [0, {classes})")

    if suppress_shift:
        omega = _omega_table(instance, lam)
        table = np.einsum("mk,kmc->mc", omega, instance.star_tables)
    else:
        table = instance.fused_table(lam)
    evidence_idx, gt, _ = oracle.sample_mixture_dataset(
        instance.domains, lam, samples, seed + 1
    )
    posteriors = table[evidence_idx]
    reference = mixture_priors(instance.bundle, lam)
    curve = metrics.reliability_bins(posteriors, gt, class_index, bins)
    consistency = metrics.posterior_prior_consistency(posteriors, reference)
    return {
        "curve": curve,
        "consistency": consistency,
        "reference_priors": reference,
        "reliability_ok": metrics.reliability_check(curve),
        "sample_count": samples,
    }


def manifest_calibration(manifest_path, frames, lam, class_index: int, bins: int,
                         kappa=None, threads: int = 1) -> dict:
    """Calibration of adapted posteriors against groundtruth label maps."""
    manifest = read_manifest(manifest_path)
    if manifest.groundtruth_map is None:
        raise SchemaError("manifest declares no groundtruth template; cannot calibrate")
    bundle = manifest_bundle(manifest)
    kappa = manifest.kappa if kappa is None else _check_kappa_override(
        kappa, manifest.source_count
    )
    if lam is None:
        if manifest.lam is None:
            raise SchemaError("no mixture weights: pass them or set lambda in the manifest")
        lam = manifest.lam
    lam = check_mixture_weights(lam, manifest.source_count)
    if not 0 <= class_index < manifest.class_count:
        raise InvalidParamError(
            f"class {class_index} out of range [0, {manifest.class_count})"
        )

    posterior_blocks = []
    gt_blocks = []
    for frame in frames:
        star_maps, disc_map = load_frame(manifest, frame)
        fused = adapt_map(star_maps, bundle, disc_map, lam, kappa, threads=threads)
        gt = read_label_map(manifest.groundtruth_path(frame))
        if gt.shape != fused.shape[:2]:
            raise DimensionMismatchError(
                f"frame {frame}: groundtruth {gt.shape} vs posterior grid {fused.shape[:2]}"
            )
        posterior_blocks.append(fused.reshape(-1, manifest.class_count))
        gt_blocks.append(gt.ravel())
    posteriors = np.concatenate(posterior_blocks)
    gt = np.concatenate(gt_blocks)
    reference = mixture_priors(bundle, lam)
    curve = metrics.reliability_bins(posteriors, gt, class_index, bins)
    consistency = metrics.posterior_prior_consistency(posteriors, reference)
    return {
        "curve": curve,
        "consistency": consistency,
        "reference_priors": reference,
        "reliability_ok": metrics.reliability_check(curve),
        "sample_count": int(gt.size),
    }


def curve_csv(curve: metrics.CalibrationCurve) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["bin", "midpoint", "mean_predicted", "frequency", "weight"])
    for i in range(curve.bin_count):
        mp = curve.mean_predicted[i]
        fr = curve.frequencies[i]
        writer.writerow([
            i,
            f"{curve.midpoints[i]:.10g}",
            "" if np.isnan(mp) else f"{mp:.10g}",
            "" if np.isnan(fr) else f"{fr:.10g}",
            f"{curve.weights[i]:.10g}",
        ])
    return out.getvalue()


def consistency_csv(consistency: metrics.PriorConsistency, reference: np.ndarray) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["class", "mean_posterior", "reference_prior", "delta"])
    for i, delta in enumerate(consistency.deltas):
        writer.writerow([
            i,
            f"{reference[i] + delta:.10g}",
            f"{reference[i]:.10g}",
            f"{delta:.10g}",
        ])
    return out.getvalue()
