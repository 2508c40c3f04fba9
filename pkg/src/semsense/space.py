"""3D semantic space, kNN activity recognition and multi-link voting."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .codec import SemanticCode


class EmptyClassError(ValueError):
    pass


@dataclass(frozen=True)
class SemanticPoint:
    x: float  # mean frequency per basis (Hz)
    y: float  # mean ln(amplitude / #bases)
    z: int    # number of bases

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, float(self.z)])


@dataclass(frozen=True)
class LabeledPoint:
    point: SemanticPoint
    label: str


@dataclass(frozen=True)
class KnnConfig:
    k: int = 3
    tie_break_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")


@dataclass(frozen=True)
class TrainingSet:
    points: tuple
    axis_scales: tuple
    labels: tuple

    def coords(self) -> np.ndarray:
        return np.array([p.point.as_array() for p in self.points]).reshape(-1, 3)

    def point_labels(self) -> list:
        return [p.label for p in self.points]

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "axis_scales": list(self.axis_scales),
            "points": [{"x": p.point.x, "y": p.point.y, "z": p.point.z, "label": p.label} for p in self.points],
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrainingSet":
        pts = tuple(LabeledPoint(SemanticPoint(float(p["x"]), float(p["y"]), int(p["z"])), p["label"])
                    for p in d["points"])
        return cls(pts, tuple(float(s) for s in d["axis_scales"]), tuple(d["labels"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "TrainingSet":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def to_point(code: SemanticCode) -> SemanticPoint:
    """Centroid of the per-basis points (F_r/B, ln(A_r/B), B)."""
    amps = code.amplitudes
    if np.any(amps <= 0):
        raise ValueError("zero-amplitude basis has no semantic-space coordinate; drop it first")
    b = code.order
    x = float(np.mean(code.frequencies / b))
    y = float(np.mean(np.log(amps / b)))
    return SemanticPoint(x, y, b)


def _axis_scales(coords: np.ndarray) -> tuple:
    if coords.shape[0] < 2:
        return (1.0, 1.0, 1.0)
    std = coords.std(axis=0, ddof=1)
    return tuple(float(s) if np.isfinite(s) and s > 0 else 1.0 for s in std)


def build_training_set(codes: Iterable) -> TrainingSet:
    """Build from ``(SemanticCode, label)`` pairs."""
    points = []
    for code, label in codes:
        points.append(LabeledPoint(to_point(code), label))
    return training_set_from_points(points)


def training_set_from_points(points: Sequence[LabeledPoint], labels: Optional[Sequence[str]] = None) -> TrainingSet:
    alphabet = tuple(sorted(set(p.label for p in points))) if labels is None else tuple(labels)
    counts = Counter(p.label for p in points)
    empty = [lab for lab in alphabet if counts[lab] == 0]
    if empty or not points:
        raise EmptyClassError(f"labels without training codes: {empty}")
    coords = np.array([p.point.as_array() for p in points])
    return TrainingSet(tuple(points), _axis_scales(coords), alphabet)


def _majority(labels: Sequence[str], rng: np.random.Generator) -> str:
    counts = Counter(labels)
    top = max(counts.values())
    tied = sorted(lab for lab, c in counts.items() if c == top)
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def neighbours(test: SemanticPoint, ts: TrainingSet, k: int) -> np.ndarray:
    """Indices of the k nearest training points (standardized Euclidean)."""
    coords = ts.coords() / np.asarray(ts.axis_scales)
    q = test.as_array() / np.asarray(ts.axis_scales)
    d2 = np.sum((coords - q) ** 2, axis=1)
    if k >= d2.size:
        idx = np.arange(d2.size)
    else:
        idx = np.argpartition(d2, k - 1)[:k]
    # stable ordering by (distance, index) keeps results reproducible under ties
    return idx[np.lexsort((idx, d2[idx]))]


def classify(test: SemanticPoint, ts: TrainingSet, cfg: KnnConfig = KnnConfig()) -> str:
    if cfg.k > len(ts.points):
        raise ValueError(f"k={cfg.k} exceeds {len(ts.points)} training points")
    labels = ts.point_labels()
    nn = neighbours(test, ts, cfg.k)
    return _majority([labels[i] for i in nn], np.random.default_rng(cfg.tie_break_seed))


def vote(link_results: Sequence[Optional[str]], previous: Optional[str] = None, seed: int = 0) -> Optional[str]:
    """Fuse per-link labels; abstaining links (None) cast no vote.

    Ties go to ``previous`` when it is among the tied labels, otherwise to a
    seeded uniform pick.  If every link abstains, ``previous`` is returned.
    """
    votes = [lab for lab in link_results if lab is not None]
    if not votes:
        return previous
    counts = Counter(votes)
    top = max(counts.values())
    tied = sorted(lab for lab, c in counts.items() if c == top)
    if len(tied) == 1:
        return tied[0]
    if previous in tied:
        return previous
    return tied[int(np.random.default_rng(seed).integers(len(tied)))]


REPORT_FIELDS = ("trace_id", "true_label", "predicted_label", "link_count")


def write_classification_report(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row[k] is None else row[k]) for k in REPORT_FIELDS})
