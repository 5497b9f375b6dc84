"""Template bank and motion-center extraction, in both domains.

Each template is a block-grid image holding a uniform rectangle, unit L2
norm, zero elsewhere.  The bank enumerates every fully contained top-left
position; the extracted "motion center" is the geometric center of the best
correlated template.  In the uncompressed domain the best template also
minimizes the L2 distance to the input (unit norms make the two criteria
coincide); in the compressed domain the correlation runs against projected
templates, never reconstructing the image.

Ties break toward the smallest template index (sizes in listed order, then
row-major position), which `np.argmax` provides for free.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StructuralError
from .imaging import BlockImage
from .projection import CompressedVector, ProjectionMatrix

DEFAULT_RECT = (10, 10)

__all__ = [
    "TemplateSpec",
    "TemplateBank",
    "MotionCenter",
    "build_template_bank",
    "extract_center_uncompressed",
    "extract_center_compressed",
    "center_error",
    "save_center_path",
    "load_center_path",
]


@dataclass(frozen=True)
class TemplateSpec:
    """Rectangle placement: top-left grid cell (x, y) and size (w, h)."""

    x: int
    y: int
    w: int
    h: int

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class MotionCenter:
    """Winning rectangle center in grid coordinates, plus its score."""

    x: float
    y: float
    score: float
    frame_index: int = 0

    def point(self) -> tuple[float, float]:
        return (self.x, self.y)


class TemplateBank:
    """Unit-norm rectangle templates and their compressed counterparts."""

    def __init__(
        self,
        specs: list[TemplateSpec],
        uncompressed: np.ndarray,
        compressed: np.ndarray,
        grid_width: int,
        grid_height: int,
        projection_seed: int,
    ):
        self.specs = specs
        self.uncompressed = uncompressed
        self.compressed = compressed
        self.grid_width = grid_width
        self.grid_height = grid_height
        self.projection_seed = projection_seed

    def __len__(self) -> int:
        return len(self.specs)


def build_template_bank(
    grid_width: int,
    grid_height: int,
    proj: ProjectionMatrix,
    rect_sizes: list[tuple[int, int]] | None = None,
) -> TemplateBank:
    """Enumerate all contained rectangle placements and project them.

    ``rect_sizes`` lists (w, h) in grid cells; the default is the single
    fixed 10x10 size.  Scores stay comparable across sizes because every
    template is normalized to unit energy before compression.
    """
    if rect_sizes is None:
        rect_sizes = [DEFAULT_RECT]
    n = grid_width * grid_height
    if proj.n != n:
        raise StructuralError(
            f"projection width {proj.n} != grid size {n} "
            f"({grid_width}x{grid_height})"
        )
    specs: list[TemplateSpec] = []
    for w, h in rect_sizes:
        if w < 1 or h < 1 or w > grid_width or h > grid_height:
            raise StructuralError(
                f"rectangle {w}x{h} does not fit in grid {grid_width}x{grid_height}"
            )
        for y in range(grid_height - h + 1):
            for x in range(grid_width - w + 1):
                specs.append(TemplateSpec(x=x, y=y, w=w, h=h))

    uncompressed = np.zeros((len(specs), n))
    for k, s in enumerate(specs):
        grid = np.zeros((grid_height, grid_width))
        grid[s.y : s.y + s.h, s.x : s.x + s.w] = 1.0 / np.sqrt(s.w * s.h)
        uncompressed[k] = grid.reshape(-1)
    compressed = uncompressed @ proj.entries.astype(np.float64).T
    return TemplateBank(
        specs=specs,
        uncompressed=uncompressed,
        compressed=compressed,
        grid_width=grid_width,
        grid_height=grid_height,
        projection_seed=proj.seed,
    )


def _center_from_scores(scores: np.ndarray, bank: TemplateBank, frame_index: int) -> MotionCenter:
    k = int(np.argmax(scores))
    cx, cy = bank.specs[k].center
    return MotionCenter(x=cx, y=cy, score=float(scores[k]), frame_index=frame_index)


def extract_center_uncompressed(
    y: BlockImage, bank: TemplateBank, frame_index: int = 0
) -> MotionCenter:
    """Best-matching template center for a block image (reference domain)."""
    if y.n != bank.uncompressed.shape[1]:
        raise StructuralError(
            f"block image length {y.n} != template length {bank.uncompressed.shape[1]}"
        )
    scores = bank.uncompressed @ y.vector
    return _center_from_scores(scores, bank, frame_index)


def extract_center_compressed(
    y_hat: CompressedVector, bank: TemplateBank, frame_index: int = 0
) -> MotionCenter:
    """Best-matching template center from compressed measurements only."""
    if y_hat.source_seed != bank.projection_seed:
        raise ConfigError(
            f"compressed vector was produced with seed {y_hat.source_seed}, "
            f"bank was built with seed {bank.projection_seed}"
        )
    if y_hat.m != bank.compressed.shape[1]:
        raise StructuralError(
            f"measurement count {y_hat.m} != bank measurement count "
            f"{bank.compressed.shape[1]}"
        )
    scores = bank.compressed @ y_hat.values
    return _center_from_scores(scores, bank, frame_index)


def center_error(path_a: list[MotionCenter], path_b: list[MotionCenter]) -> float:
    """Mean Euclidean distance, in grid cells, between aligned center paths."""
    if len(path_a) != len(path_b):
        raise StructuralError(
            f"center paths differ in length: {len(path_a)} vs {len(path_b)}"
        )
    if not path_a:
        raise StructuralError("center paths must be non-empty")
    a = np.array([c.point() for c in path_a])
    b = np.array([c.point() for c in path_b])
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


def save_center_path(path: str, centers: list[MotionCenter]) -> None:
    """Write a center path as CSV rows (frame_index, x, y, score)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "x", "y", "score"])
        for c in centers:
            writer.writerow([c.frame_index, repr(c.x), repr(c.y), repr(c.score)])


def load_center_path(path: str) -> list[MotionCenter]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["frame_index", "x", "y", "score"]:
            raise StructuralError(f"unexpected center path header: {header}")
        return [
            MotionCenter(
                frame_index=int(row[0]), x=float(row[1]), y=float(row[2]),
                score=float(row[3]),
            )
            for row in reader
        ]
