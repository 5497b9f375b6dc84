"""Seeded random sign projection: the second compression layer.

A ``ProjectionMatrix`` holds i.i.d. entries drawn uniformly from {+1, -1}.
Entries come from the raw output bits of numpy's Philox counter-based
generator keyed by the caller's seed, so the same ``(m, n, seed)`` triple
reproduces the same matrix bit-for-bit on any platform.  The matrix is kept
unnormalized; correlation argmaxes downstream are scale-invariant, so any
1/sqrt(m) style scaling is purely cosmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .imaging import BlockImage, DifferenceImage, block_average, block_average_matrix

__all__ = [
    "ProjectionMatrix",
    "CompressedVector",
    "build_projection",
    "project",
    "CombinedOperator",
    "combined_matrix",
]


@dataclass(frozen=True)
class ProjectionMatrix:
    """An m x n matrix of +-1 signs, reproducible from (m, n, seed)."""

    m: int
    n: int
    seed: int
    entries: np.ndarray

    def __post_init__(self):
        e = self.entries
        if e.shape != (self.m, self.n):
            raise StructuralError(f"entries shape {e.shape} != ({self.m}, {self.n})")
        e.setflags(write=False)


@dataclass(frozen=True)
class CompressedVector:
    """The m compressed measurements of one block image, tagged with the
    seed of the projection that produced them."""

    values: np.ndarray
    source_seed: int

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.size


def _sign_bits(count: int, seed: int) -> np.ndarray:
    """First ``count`` raw Philox output bits mapped to +-1 (int8)."""
    words = (count + 63) // 64
    raw = np.random.Philox(key=seed).random_raw(words)
    # big-endian byte view keeps the bit order platform-independent
    raw_bytes = np.frombuffer(np.asarray(raw, dtype=">u8").tobytes(), dtype=np.uint8)
    bits = np.unpackbits(raw_bytes)[:count]
    return (1 - 2 * bits.astype(np.int8)).astype(np.int8)


def build_projection(m: int, n: int, seed: int) -> ProjectionMatrix:
    """Draw an m x n sign matrix deterministically from ``seed``."""
    if m < 1 or n < 1:
        raise StructuralError(f"projection dimensions must be >= 1, got ({m}, {n})")
    entries = _sign_bits(m * n, seed).reshape(m, n)
    return ProjectionMatrix(m=m, n=n, seed=seed, entries=entries)


def _as_vector(y) -> np.ndarray:
    if isinstance(y, BlockImage):
        return y.vector
    return np.asarray(y, dtype=np.float64).reshape(-1)


def project(proj: ProjectionMatrix, y) -> CompressedVector:
    """Apply the sign projection to a block image (or plain length-n vector)."""
    vec = _as_vector(y)
    if vec.size != proj.n:
        raise StructuralError(f"input length {vec.size} != projection width {proj.n}")
    values = proj.entries.astype(np.float64) @ vec
    return CompressedVector(values=values, source_seed=proj.seed)


class CombinedOperator:
    """Both compression layers fused: block-average then project.

    Applied matrix-free (average first, multiply second) to mirror the two
    stage computation; ``combined_matrix`` materializes the equivalent
    single matrix for small-instance checks.
    """

    def __init__(self, proj: ProjectionMatrix, block: int, width: int, height: int):
        if width % block or height % block:
            raise StructuralError(
                f"image {width}x{height} not divisible by block size {block}"
            )
        n = (width // block) * (height // block)
        if proj.n != n:
            raise StructuralError(
                f"projection width {proj.n} != block grid size {n} "
                f"for {width}x{height} at block {block}"
            )
        self.proj = proj
        self.block = block
        self.width = width
        self.height = height

    def apply(self, d: DifferenceImage) -> CompressedVector:
        return project(self.proj, block_average(d, self.block))

    @property
    def block_ratio(self) -> float:
        """Pixels per block-image value (256 for the 16x16 default)."""
        return self.block * self.block

    @property
    def projection_ratio(self) -> float:
        """Block-image length over measurement count, N / m."""
        return self.proj.n / self.proj.m

    @property
    def overall_ratio(self) -> float:
        """Native pixels per compressed measurement, (W*H) / m."""
        return (self.width * self.height) / self.proj.m


def combined_matrix(proj: ProjectionMatrix, block: int, width: int, height: int) -> np.ndarray:
    """Materialized combined operator of shape (m, width*height)."""
    psi = block_average_matrix(width, height, block)
    if proj.n != psi.shape[0]:
        raise StructuralError(
            f"projection width {proj.n} incompatible with grid {psi.shape[0]}"
        )
    return proj.entries.astype(np.float64) @ psi
