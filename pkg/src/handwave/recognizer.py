"""FIFO motion buffer, DTW distances and nearest-neighbour gesture matching.

Distance machinery:

* ``dtw_distance`` is classic dynamic time warping over 2-D points with the
  step set {(1,0), (0,1), (1,1)}, Euclidean per-step cost and matched
  endpoints; it returns the accumulated cost.
* ``subsequence_match`` is the open-beginning, closed-end variant: the
  training trace may start anywhere inside the buffer but must end at the
  buffer's newest point.  Each candidate start offset is scored by its full
  DTW cost divided by the alignment path length (number of matched pairs),
  and the smallest normalized score wins.  The buffer holds trailing
  history, so "the gesture ends now" is the closed end.

Where the minimum-cost alignment is ambiguous the path-length bookkeeping
prefers the diagonal step, then the buffer-advancing step, then the
training-advancing step, so results do not depend on evaluation order.

Classification compares the buffer against every training trace of every
class; the global minimum wins if it falls below the rejection threshold
``tau``, otherwise the verdict is "no gesture".  ``tau`` is recalibrated at
training time as a percentile of within-class pairwise normalized DTW
distances and stored in the model file.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import StructuralError
from .pipeline import Pipeline
from .imaging import Frame

__all__ = [
    "MotionTrace",
    "GestureClass",
    "Verdict",
    "GestureModel",
    "dtw_distance",
    "dtw_normalized",
    "subsequence_match",
    "classify",
    "train_from_frames",
    "calibrate_tau",
    "train_gesture_model",
    "save_model",
    "load_model",
    "DEFAULT_CAPACITY",
    "MODEL_FORMAT",
]

DEFAULT_CAPACITY = 50
TAU_PERCENTILE = 95.0
MODEL_FORMAT = "handwave-model v1"
DTW_VARIANT = "open-begin/closed-end, path-length normalized"


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _dtw_cost_len(a, b):
    """Accumulated DTW cost and optimal alignment path length (cell count)."""
    la, lb = a.shape[0], b.shape[0]
    cost = np.empty((la, lb))
    length = np.empty((la, lb), np.int64)
    for i in range(la):
        for j in range(lb):
            d = np.sqrt((a[i, 0] - b[j, 0]) ** 2 + (a[i, 1] - b[j, 1]) ** 2)
            if i == 0 and j == 0:
                c = 0.0
                l = 0
            elif i == 0:
                c = cost[0, j - 1]
                l = length[0, j - 1]
            elif j == 0:
                c = cost[i - 1, 0]
                l = length[i - 1, 0]
            else:
                c = cost[i - 1, j - 1]
                l = length[i - 1, j - 1]
                if cost[i - 1, j] < c:
                    c = cost[i - 1, j]
                    l = length[i - 1, j]
                if cost[i, j - 1] < c:
                    c = cost[i, j - 1]
                    l = length[i, j - 1]
            cost[i, j] = c + d
            length[i, j] = l + 1
    return cost[la - 1, lb - 1], length[la - 1, lb - 1]


@njit(cache=True)
def _subsequence_best(buf, train):
    """Smallest normalized DTW over all start offsets into the buffer."""
    best = np.inf
    for s in range(buf.shape[0]):
        c, l = _dtw_cost_len(buf[s:], train)
        nd = c / l
        if nd < best:
            best = nd
    return best


def _as_points(seq) -> np.ndarray:
    if isinstance(seq, MotionTrace):
        arr = seq.array
    else:
        arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        arr = arr.reshape(-1, 2)
    return np.ascontiguousarray(arr, dtype=np.float64)


def dtw_distance(a, b) -> float:
    """Accumulated DTW cost between two non-empty 2-D point sequences."""
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise StructuralError("DTW requires non-empty sequences")
    cost, _ = _dtw_cost_len(pa, pb)
    return float(cost)


def dtw_normalized(a, b) -> float:
    """DTW cost divided by the optimal alignment path length."""
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise StructuralError("DTW requires non-empty sequences")
    cost, length = _dtw_cost_len(pa, pb)
    return float(cost) / int(length)


def subsequence_match(buffer, training) -> float:
    """Best normalized match of ``training`` against any buffer suffix."""
    buf, train = _as_points(buffer), _as_points(training)
    if buf.shape[0] == 0 or train.shape[0] == 0:
        raise StructuralError("subsequence match requires non-empty sequences")
    return float(_subsequence_best(buf, train))


# ---------------------------------------------------------------------------
# Buffer, classes and classification
# ---------------------------------------------------------------------------

class MotionTrace:
    """Fixed-capacity FIFO of (x, y) grid points; oldest evicted first."""

    def __init__(self, points=None, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise StructuralError("trace capacity must be >= 1")
        self.capacity = capacity
        self._points: deque = deque(maxlen=capacity)
        if points is not None:
            for p in np.asarray(points, dtype=np.float64).reshape(-1, 2):
                self._points.append((float(p[0]), float(p[1])))

    def push(self, point) -> None:
        x, y = point
        self._points.append((float(x), float(y)))

    @property
    def array(self) -> np.ndarray:
        if not self._points:
            return np.empty((0, 2))
        return np.array(self._points, dtype=np.float64)

    def __len__(self) -> int:
        return len(self._points)


@dataclass
class GestureClass:
    """One label with its training traces (each an (n, 2) array)."""

    label: str
    training: list[np.ndarray]

    def __post_init__(self):
        if not self.training:
            raise StructuralError(f"class {self.label!r} has no training traces")
        self.training = [_as_points(t) for t in self.training]
        for t in self.training:
            if t.shape[0] == 0:
                raise StructuralError(f"class {self.label!r} has an empty training trace")


@dataclass(frozen=True)
class Verdict:
    """Recognition outcome: label is None when nothing passed the threshold."""

    label: str | None
    distance: float
    runner_up: float


def classify(buffer, classes: list[GestureClass], tau: float) -> Verdict:
    """Nearest-training-trace verdict with rejection threshold ``tau``.

    Ties break by class declaration order, then training-trace index
    (strict improvement required to displace the incumbent).
    """
    if not classes:
        raise StructuralError("classify needs at least one gesture class")
    buf = _as_points(buffer)
    if buf.shape[0] == 0:
        return Verdict(label=None, distance=np.inf, runner_up=np.inf)
    best = np.inf
    second = np.inf
    best_label = None
    for cls in classes:
        for trace in cls.training:
            d = float(_subsequence_best(buf, trace))
            if d < best:
                second = best
                best = d
                best_label = cls.label
            elif d < second:
                second = d
    if best < tau:
        return Verdict(label=best_label, distance=best, runner_up=second)
    return Verdict(label=None, distance=best, runner_up=second)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train_from_frames(frames: list[Frame], pipeline: Pipeline) -> MotionTrace:
    """Motion trace of a clip, extracted in the uncompressed domain."""
    if len(frames) < 2:
        raise StructuralError("training needs at least two frames")
    trace = pipeline.trace(frames, domain="uncompressed")
    return MotionTrace(trace.points, capacity=max(DEFAULT_CAPACITY, len(trace)))


def calibrate_tau(classes: list[GestureClass], percentile: float = TAU_PERCENTILE) -> float:
    """Percentile of within-class pairwise normalized DTW distances."""
    dists = []
    for cls in classes:
        traces = cls.training
        for i in range(len(traces)):
            for j in range(i + 1, len(traces)):
                dists.append(dtw_normalized(traces[i], traces[j]))
    if not dists:
        raise StructuralError("tau calibration needs at least one within-class pair")
    return float(np.percentile(dists, percentile))


@dataclass
class GestureModel:
    """Trained classifier: classes, rejection threshold, config fingerprint."""

    classes: list[GestureClass]
    tau: float
    fingerprint: dict[str, str]

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.classes]

    def classify(self, buffer) -> Verdict:
        return classify(buffer, self.classes, self.tau)


def train_gesture_model(
    labeled_traces: list[tuple[str, np.ndarray]],
    fingerprint: dict[str, str] | None = None,
    percentile: float = TAU_PERCENTILE,
) -> GestureModel:
    """Group traces by label (first-seen order) and calibrate the threshold."""
    order: list[str] = []
    grouped: dict[str, list[np.ndarray]] = {}
    for label, trace in labeled_traces:
        if label not in grouped:
            grouped[label] = []
            order.append(label)
        grouped[label].append(trace)
    classes = [GestureClass(label, grouped[label]) for label in order]
    tau = calibrate_tau(classes, percentile)
    fp = dict(fingerprint or {})
    fp.setdefault("dtw", DTW_VARIANT)
    return GestureModel(classes=classes, tau=tau, fingerprint=fp)


# ---------------------------------------------------------------------------
# Model file: versioned plain-text bundle
# ---------------------------------------------------------------------------

def save_model(path: str, model: GestureModel) -> None:
    lines = [MODEL_FORMAT, f"tau={model.tau!r}"]
    for key in sorted(model.fingerprint):
        lines.append(f"fingerprint.{key}={model.fingerprint[key]}")
    lines.append("labels=" + ",".join(model.labels))
    for cls in model.classes:
        for idx, trace in enumerate(cls.training):
            pts = ";".join(f"{p[0]!r}:{p[1]!r}" for p in trace)
            lines.append(f"trace|{cls.label}|{idx}|{pts}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> GestureModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != MODEL_FORMAT:
        raise StructuralError(f"{path} is not a {MODEL_FORMAT} file")
    tau = None
    fingerprint: dict[str, str] = {}
    order: list[str] = []
    grouped: dict[str, list[np.ndarray]] = {}
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("trace|"):
            _, label, _, pts = line.split("|", 3)
            points = [
                (float(x), float(y))
                for x, y in (pair.split(":") for pair in pts.split(";") if pair)
            ]
            grouped.setdefault(label, []).append(np.array(points))
        elif line.startswith("tau="):
            tau = float(line[4:])
        elif line.startswith("fingerprint."):
            key, _, value = line[len("fingerprint."):].partition("=")
            fingerprint[key] = value
        elif line.startswith("labels="):
            order = [s for s in line[len("labels="):].split(",") if s]
    if tau is None:
        raise StructuralError(f"{path} is missing the tau line")
    classes = [GestureClass(label, grouped[label]) for label in order]
    return GestureModel(classes=classes, tau=tau, fingerprint=fingerprint)
