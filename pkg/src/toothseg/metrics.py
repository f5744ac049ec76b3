"""Mask-level IoU / precision / recall / F1 and directory evaluation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, MissingMaskError
from .imaging import ensure_mask, load_mask

VIEWS = ("lower", "front", "upper")


@dataclass(frozen=True)
class MaskScore:
    iou: float
    precision: float
    recall: float
    f1: float
    tp: float
    fp: float
    fn: float


@dataclass
class EvalRow:
    image_id: str
    view: str
    score: MaskScore | None
    error: str | None = None


@dataclass
class EvalReport:
    per_image: list[EvalRow]
    per_view: dict[str, MaskScore]
    overall: MaskScore


def mask_score(pred: np.ndarray, gt: np.ndarray) -> MaskScore:
    """Pixel-set scores. 0/0 ratios are 0, except IoU of two empty masks,
    which is 1 (perfect agreement by convention).

    Raises:
        DimensionMismatchError: mask shapes differ.
    """
    ensure_mask(pred)
    ensure_mask(gt)
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"pred {pred.shape} vs gt {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    union = tp + fp + fn
    iou = tp / union if union else 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MaskScore(iou, precision, recall, f1, tp, fp, fn)


def mean_score(scores: list[MaskScore]) -> MaskScore:
    """Unweighted arithmetic mean of every field."""
    if not scores:
        return MaskScore(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    return MaskScore(
        iou=float(np.mean([s.iou for s in scores])),
        precision=float(np.mean([s.precision for s in scores])),
        recall=float(np.mean([s.recall for s in scores])),
        f1=float(np.mean([s.f1 for s in scores])),
        tp=float(np.mean([s.tp for s in scores])),
        fp=float(np.mean([s.fp for s in scores])),
        fn=float(np.mean([s.fn for s in scores])),
    )


def load_manifest(path: str | Path) -> list[tuple[str, str]]:
    """Read ``{"images":[{"image_id":..., "view":...}]}``."""
    doc = json.loads(Path(path).read_text())
    entries = doc.get("images") if isinstance(doc, dict) else None
    if not isinstance(entries, list):
        raise ValueError(f"{path}: expected an object with an 'images' list")
    out = []
    for entry in entries:
        view = str(entry["view"])
        if view not in VIEWS:
            raise ValueError(f"{path}: unknown view {view!r}")
        out.append((str(entry["image_id"]), view))
    return out


def _resolve_mask(directory: Path, image_id: str) -> Path | None:
    # prefer the explicit _mask suffix: dataset directories also hold the
    # scene image under <id>.png
    for name in (f"{image_id}_mask.png", f"{image_id}.png"):
        candidate = directory / name
        if candidate.is_file():
            return candidate
    return None


def evaluate_dirs(
    pred_dir: str | Path,
    gt_dir: str | Path,
    manifest: list[tuple[str, str]],
) -> EvalReport:
    """Score every manifest pair; aggregate per view and overall.

    A per-pair dimension mismatch is reported on its row and the row is
    skipped from the means; a missing file aborts with MissingMaskError.
    """
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    rows: list[EvalRow] = []
    for image_id, view in manifest:
        pred_path = _resolve_mask(pred_dir, image_id)
        gt_path = _resolve_mask(gt_dir, image_id)
        if pred_path is None:
            raise MissingMaskError(f"no predicted mask for image id {image_id!r} in {pred_dir}")
        if gt_path is None:
            raise MissingMaskError(f"no ground-truth mask for image id {image_id!r} in {gt_dir}")
        try:
            score = mask_score(load_mask(pred_path), load_mask(gt_path))
            rows.append(EvalRow(image_id, view, score))
        except DimensionMismatchError as exc:
            rows.append(EvalRow(image_id, view, None, error=f"dimension_mismatch: {exc}"))

    valid = [r for r in rows if r.score is not None]
    per_view = {
        view: mean_score([r.score for r in valid if r.view == view])
        for view in VIEWS
        if any(r.view == view for r in valid)
    }
    overall = mean_score([r.score for r in valid])
    return EvalReport(rows, per_view, overall)


def _score_dict(score: MaskScore) -> dict:
    return {
        "iou": score.iou,
        "precision": score.precision,
        "recall": score.recall,
        "f1": score.f1,
        "tp": score.tp,
        "fp": score.fp,
        "fn": score.fn,
    }


def report_to_dict(report: EvalReport) -> dict:
    per_image = []
    for row in report.per_image:
        entry: dict = {"image_id": row.image_id, "view": row.view}
        if row.score is not None:
            entry.update(_score_dict(row.score))
        else:
            entry["error"] = row.error
        per_image.append(entry)
    return {
        "per_image": per_image,
        "per_view": {view: _score_dict(s) for view, s in report.per_view.items()},
        "overall": _score_dict(report.overall),
    }
