"""Desk-scale accuracy metrics and the FP32-relative accuracy gate.

Detection uses single-threshold mean average precision with all-points
interpolation: predictions are matched greedily in descending score, each
prediction is judged against its highest-overlap ground truth only (a
prediction whose best-overlap box is already taken is a false positive, it
does not fall back to a lesser match), and the precision envelope is made
non-increasing before integrating. Score ties break by input order.
Conventions for degenerate inputs: no predictions scores 0.0; no ground
truths and no predictions scores 1.0.

Segmentation uses mean intersection-over-union from a dense confusion
matrix, averaged over the classes present in the ground truth.

Internal arithmetic on precision/recall/IoU ratios uses exact rationals so
results are reproducible to the last bit and tests can assert exact values.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box; score is present on predictions only."""

    x1: float
    y1: float
    x2: float
    y2: float
    class_id: int = 0
    score: float | None = None

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"box must have positive area; got {(self.x1, self.y1, self.x2, self.y2)}")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1]; got {self.score}")


class SegmentationMask:
    """Dense per-pixel class ids, row-major."""

    def __init__(self, width: int, height: int, class_ids) -> None:
        if width < 1 or height < 1:
            raise ValueError(f"mask dimensions must be positive; got {width}x{height}")
        data = np.asarray(class_ids, dtype=np.int64)
        if data.ndim == 1:
            if data.size != width * height:
                raise ValueError(f"expected {width * height} class ids; got {data.size}")
            data = data.reshape(height, width)
        elif data.shape != (height, width):
            raise ValueError(f"mask shape {data.shape} != (height={height}, width={width})")
        self.width = width
        self.height = height
        self.data = data


@dataclass(frozen=True)
class GateResult:
    measured: float
    reference: float
    constraint: float
    threshold: float
    passed: bool


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter
    return inter / union


def _match_predictions(predictions, ground_truths, iou_threshold):
    """Greedy score-descending matching; returns per-prediction hit flags.

    predictions and ground_truths are sequences of (frame_id, BBox).
    """
    order = sorted(range(len(predictions)), key=lambda i: -predictions[i][1].score)
    gts_by_frame: dict = {}
    for frame_id, box in ground_truths:
        gts_by_frame.setdefault(frame_id, []).append(box)
    taken: dict = {frame_id: [False] * len(boxes) for frame_id, boxes in gts_by_frame.items()}

    hits = [False] * len(predictions)
    for i in order:
        frame_id, pred = predictions[i]
        candidates = gts_by_frame.get(frame_id, [])
        best, best_iou = -1, 0.0
        for j, gt in enumerate(candidates):
            overlap = iou(pred, gt)
            if overlap > best_iou:
                best, best_iou = j, overlap
        if best >= 0 and best_iou >= iou_threshold and not taken[frame_id][best]:
            taken[frame_id][best] = True
            hits[i] = True
    return order, hits


def _average_precision_exact(predictions, ground_truths, iou_threshold) -> Fraction:
    n_gt = len(ground_truths)
    if n_gt == 0:
        return Fraction(1) if not predictions else Fraction(0)
    if not predictions:
        return Fraction(0)
    for _, box in predictions:
        if box.score is None:
            raise ValueError("predictions must carry scores")

    order, hits = _match_predictions(predictions, ground_truths, iou_threshold)
    tp = 0
    recalls: list[Fraction] = []
    precisions: list[Fraction] = []
    for rank, i in enumerate(order, start=1):
        if hits[i]:
            tp += 1
        recalls.append(Fraction(tp, n_gt))
        precisions.append(Fraction(tp, rank))

    # Non-increasing precision envelope, integrated over recall steps.
    envelope = list(precisions)
    for k in range(len(envelope) - 2, -1, -1):
        envelope[k] = max(envelope[k], envelope[k + 1])
    area = Fraction(0)
    previous_recall = Fraction(0)
    for recall, precision in zip(recalls, envelope):
        if recall != previous_recall:
            area += (recall - previous_recall) * precision
            previous_recall = recall
    return area


def average_precision(predictions, ground_truths, iou_threshold: float = 0.5) -> float:
    """Single-class AP over (frame_id, BBox) records."""
    return float(_average_precision_exact(predictions, ground_truths, iou_threshold))


def mean_ap(predictions, ground_truths, iou_threshold: float = 0.5) -> float:
    """Unweighted mean AP over the classes present in the ground truth.

    Classes predicted but absent from the ground truth are excluded entirely.
    Raises ValueError when the ground truth is empty.
    """
    classes = sorted({box.class_id for _, box in ground_truths})
    if not classes:
        raise ValueError("mean_ap requires at least one ground-truth instance")
    total = Fraction(0)
    for class_id in classes:
        class_preds = [(f, b) for f, b in predictions if b.class_id == class_id]
        class_gts = [(f, b) for f, b in ground_truths if b.class_id == class_id]
        total += _average_precision_exact(class_preds, class_gts, iou_threshold)
    return float(total / len(classes))


def miou(predicted: SegmentationMask, truth: SegmentationMask, num_classes: int) -> float:
    """Mean IoU over classes present in truth, from a dense confusion matrix."""
    if (predicted.width, predicted.height) != (truth.width, truth.height):
        raise ValueError(
            f"mask dimensions differ: predicted {(predicted.width, predicted.height)} "
            f"vs truth {(truth.width, truth.height)}"
        )
    for name, mask in (("predicted", predicted), ("truth", truth)):
        if mask.data.min() < 0 or mask.data.max() >= num_classes:
            raise ValueError(f"{name} mask holds class ids outside [0, {num_classes})")

    flat_truth = truth.data.ravel()
    flat_pred = predicted.data.ravel()
    confusion = np.bincount(
        flat_truth * num_classes + flat_pred, minlength=num_classes * num_classes
    ).reshape(num_classes, num_classes)

    diag = np.diag(confusion)
    row = confusion.sum(axis=1)
    col = confusion.sum(axis=0)
    present = np.flatnonzero(row > 0)
    total = Fraction(0)
    for c in present:
        union = int(row[c] + col[c] - diag[c])
        total += Fraction(int(diag[c]), union)
    return float(total / len(present))


def accuracy_gate(measured: float, reference: float, constraint: float) -> GateResult:
    """Pass iff measured reaches constraint * reference; ties pass."""
    if reference <= 0:
        raise ValueError(f"reference metric must be positive; got {reference}")
    if not 0.0 < constraint <= 1.0:
        raise ValueError(f"constraint must be in (0, 1]; got {constraint}")
    threshold = reference * constraint
    return GateResult(
        measured=measured,
        reference=reference,
        constraint=constraint,
        threshold=threshold,
        passed=measured >= threshold,
    )


# -- line-delimited interchange files ---------------------------------------
#
# Detection files, one record per line (field order is normative):
#   pred,<frame_id>,<class_id>,<score>,<x1>,<y1>,<x2>,<y2>
#   gt,<frame_id>,<class_id>,<x1>,<y1>,<x2>,<y2>
# Segmentation files, one mask per line:
#   mask,<frame_id>,<pred|truth>,<width>,<height>,<v0>,...,<v_{w*h-1}>


def read_detections(path):
    """Parse a detection interchange file into (predictions, ground_truths)."""
    predictions = []
    ground_truths = []
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            tag = fields[0]
            try:
                if tag == "pred":
                    if len(fields) != 8:
                        raise ValueError(f"pred records take 8 fields; got {len(fields)}")
                    frame, class_id = int(fields[1]), int(fields[2])
                    score = float(fields[3])
                    coords = tuple(float(v) for v in fields[4:8])
                    predictions.append((frame, BBox(*coords, class_id=class_id, score=score)))
                elif tag == "gt":
                    if len(fields) != 7:
                        raise ValueError(f"gt records take 7 fields; got {len(fields)}")
                    frame, class_id = int(fields[1]), int(fields[2])
                    coords = tuple(float(v) for v in fields[3:7])
                    ground_truths.append((frame, BBox(*coords, class_id=class_id)))
                else:
                    raise ValueError(f"unknown record tag '{tag}'")
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return predictions, ground_truths


def read_masks(path):
    """Parse a segmentation interchange file into {(frame_id, kind): mask}."""
    masks = {}
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            try:
                if fields[0] != "mask" or len(fields) < 5:
                    raise ValueError("expected mask,<frame>,<pred|truth>,<width>,<height>,...")
                frame = int(fields[1])
                kind = fields[2]
                if kind not in ("pred", "truth"):
                    raise ValueError(f"mask kind must be pred or truth; got '{kind}'")
                width, height = int(fields[3]), int(fields[4])
                values = [int(v) for v in fields[5:]]
                masks[(frame, kind)] = SegmentationMask(width, height, values)
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return masks
