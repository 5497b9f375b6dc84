"""End-to-end wiring: frames -> differences -> blocks -> measurements -> centers.

A ``Pipeline`` owns one projection, one template bank and the motion gate.
Idle differences (block-image norm under the gate) emit no center, so a
static scene produces an empty trace.  Both extraction domains share the
same gating and frame indexing, which keeps their center paths aligned for
error measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StructuralError
from .imaging import (
    BlockImage,
    Frame,
    block_average,
    block_subsample,
    frame_difference,
    max_block_norm,
    motion_energy,
)
from .projection import CombinedOperator, build_projection, project
from .smashed import (
    MotionCenter,
    build_template_bank,
    extract_center_compressed,
    extract_center_uncompressed,
)

__all__ = ["PipelineConfig", "Pipeline", "Trace"]

STRATEGIES = ("average", "subsample")


@dataclass(frozen=True)
class PipelineConfig:
    """Geometry, compression and gating parameters for one session."""

    width: int = 640
    height: int = 480
    block: int = 16
    measurements: int = 400
    rect_sizes: tuple[tuple[int, int], ...] = ((10, 10),)
    projection_seed: int = 7
    motion_gate_frac: float = 0.02
    strategy: str = "average"

    def __post_init__(self):
        if self.width % self.block or self.height % self.block:
            raise StructuralError(
                f"frame {self.width}x{self.height} not divisible by block {self.block}"
            )
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown compression strategy {self.strategy!r}")
        if not 1 <= self.measurements <= self.n:
            raise ConfigError(
                f"measurement count must lie in [1, {self.n}], got {self.measurements}"
            )

    @property
    def grid_width(self) -> int:
        return self.width // self.block

    @property
    def grid_height(self) -> int:
        return self.height // self.block

    @property
    def n(self) -> int:
        return self.grid_width * self.grid_height

    @property
    def motion_gate(self) -> float:
        return self.motion_gate_frac * max_block_norm(self.grid_width, self.grid_height)


@dataclass(frozen=True)
class Trace:
    """Gated center path of one clip plus which differences were kept."""

    centers: list[MotionCenter]
    kept: np.ndarray  # bool per difference index

    @property
    def points(self) -> np.ndarray:
        if not self.centers:
            return np.empty((0, 2))
        return np.array([c.point() for c in self.centers])

    def __len__(self) -> int:
        return len(self.centers)


class Pipeline:
    """One session: fixed projection, template bank and gate."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.projection = build_projection(cfg.measurements, cfg.n, cfg.projection_seed)
        self.bank = build_template_bank(
            cfg.grid_width, cfg.grid_height, self.projection, list(cfg.rect_sizes)
        )
        self.operator = CombinedOperator(self.projection, cfg.block, cfg.width, cfg.height)

    def compress_difference(self, d) -> BlockImage:
        if self.cfg.strategy == "subsample":
            return block_subsample(d, self.cfg.block)
        return block_average(d, self.cfg.block)

    def difference_blocks(self, frames: list[Frame]) -> list[BlockImage]:
        """Block image of each consecutive-frame difference."""
        if len(frames) < 2:
            raise StructuralError("need at least two frames to form a difference")
        return [
            self.compress_difference(frame_difference(frames[i], frames[i + 1]))
            for i in range(len(frames) - 1)
        ]

    def trace_from_blocks(self, blocks: list[BlockImage], domain: str = "compressed") -> Trace:
        """Extract gated centers from precomputed block images."""
        if domain not in ("compressed", "uncompressed"):
            raise ConfigError(f"unknown extraction domain {domain!r}")
        gate = self.cfg.motion_gate
        centers = []
        kept = np.zeros(len(blocks), dtype=bool)
        for i, y in enumerate(blocks):
            if motion_energy(y) < gate:
                continue
            kept[i] = True
            if domain == "compressed":
                c = extract_center_compressed(project(self.projection, y), self.bank, i)
            else:
                c = extract_center_uncompressed(y, self.bank, i)
            centers.append(c)
        return Trace(centers=centers, kept=kept)

    def trace(self, frames: list[Frame], domain: str = "compressed") -> Trace:
        return self.trace_from_blocks(self.difference_blocks(frames), domain)
