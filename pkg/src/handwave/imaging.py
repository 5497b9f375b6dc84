"""Native-resolution frames, consecutive-frame differencing and block averaging.

The first compression layer of the pipeline: a ``Frame`` pair turns into a
``DifferenceImage`` whose per-block means form a ``BlockImage`` of
``(height/B) x (width/B)`` values.  All arithmetic is carried out in float64
so that absolute differences and block sums never wrap; block means are kept
real-valued rather than re-quantized.

Vectorization convention (fixed for the life of a pipeline): row-major, i.e.
the block at grid row ``r`` and grid column ``c`` lands at vector index
``r * grid_width + c``.  The projection layer and the template bank rely on
this same ordering.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError

DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480
DEFAULT_BLOCK = 16

__all__ = [
    "Frame",
    "DifferenceImage",
    "BlockImage",
    "frame_difference",
    "block_average",
    "block_subsample",
    "motion_energy",
    "max_block_norm",
    "block_average_matrix",
    "write_raw_video",
    "read_raw_video",
]


@dataclass(frozen=True)
class Frame:
    """A grayscale frame: uint8 intensities in [0, 255], shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise StructuralError(f"frame pixels must be 2-D, got shape {px.shape}")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise StructuralError("frame intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class DifferenceImage:
    """Absolute difference of two frames; non-negative float64 magnitudes."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64))
        if px.ndim != 2:
            raise StructuralError(f"difference pixels must be 2-D, got shape {px.shape}")
        if np.any(px < 0):
            raise StructuralError("difference image must be non-negative")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BlockImage:
    """Grid of block means with a row-major vector view of length N."""

    values: np.ndarray
    vector: np.ndarray = field(init=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 2:
            raise StructuralError(f"block values must be 2-D, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        vec = vals.reshape(-1)
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @property
    def grid_width(self) -> int:
        return self.values.shape[1]

    @property
    def grid_height(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.size


def frame_difference(a: Frame, b: Frame) -> DifferenceImage:
    """Absolute per-pixel difference |b - a| of two same-sized frames."""
    if a.pixels.shape != b.pixels.shape:
        raise StructuralError(
            f"frame dimensions differ: {a.pixels.shape} vs {b.pixels.shape}"
        )
    diff = np.abs(b.pixels.astype(np.int16) - a.pixels.astype(np.int16))
    return DifferenceImage(diff)


def _check_divisible(height: int, width: int, block: int) -> None:
    if block < 1:
        raise StructuralError(f"block size must be >= 1, got {block}")
    if width % block or height % block:
        raise StructuralError(
            f"image {width}x{height} not divisible by block size {block}"
        )


def block_average(d: DifferenceImage, block: int = DEFAULT_BLOCK) -> BlockImage:
    """Mean of each ``block x block`` tile; output grid is (H/block, W/block)."""
    _check_divisible(d.height, d.width, block)
    gh, gw = d.height // block, d.width // block
    tiles = d.pixels.reshape(gh, block, gw, block)
    return BlockImage(tiles.mean(axis=(1, 3)))


def block_subsample(d: DifferenceImage, block: int = DEFAULT_BLOCK) -> BlockImage:
    """Keep one pixel per block (top-left), the cheap alternative to averaging."""
    _check_divisible(d.height, d.width, block)
    return BlockImage(d.pixels[::block, ::block])


def motion_energy(y: BlockImage) -> float:
    """L2 norm of the block image's vector view; gates idle frames upstream."""
    return float(np.linalg.norm(y.vector))


def max_block_norm(grid_width: int, grid_height: int, peak: float = 255.0) -> float:
    """Largest possible block-image norm (every block at the peak intensity)."""
    return peak * np.sqrt(grid_width * grid_height)


def block_average_matrix(width: int, height: int, block: int) -> np.ndarray:
    """Materialized block-averaging operator of shape (N, width*height).

    Row k holds 1/block^2 on the pixels of block k (row-major block order,
    row-major pixels).  Only meant for small-instance verification; the
    pipeline itself applies the operator via reshaping.
    """
    _check_divisible(height, width, block)
    gh, gw = height // block, width // block
    n = gh * gw
    mat = np.zeros((n, width * height))
    w = 1.0 / (block * block)
    for r in range(gh):
        for c in range(gw):
            k = r * gw + c
            for dr in range(block):
                row = r * block + dr
                start = row * width + c * block
                mat[k, start : start + block] = w
    return mat


# ---------------------------------------------------------------------------
# Raw video files: flat binary of uint8 frames plus a sidecar text header.
# ---------------------------------------------------------------------------

def _header_path(path: str) -> str:
    return path + ".hdr"


def write_raw_video(path: str, frames: list[Frame], fps: float) -> None:
    """Write frames as concatenated row-major uint8 plus a ``.hdr`` sidecar."""
    if not frames:
        raise StructuralError("cannot write an empty frame sequence")
    w, h = frames[0].width, frames[0].height
    for f in frames:
        if f.width != w or f.height != h:
            raise StructuralError("all frames in a clip must share dimensions")
    with open(path, "wb") as fh:
        for f in frames:
            fh.write(f.pixels.tobytes())
    with open(_header_path(path), "w") as fh:
        fh.write(f"width={w}\nheight={h}\nframes={len(frames)}\nfps={fps!r}\n")


def read_raw_video(path: str) -> tuple[list[Frame], float]:
    """Read a raw clip written by :func:`write_raw_video`; returns (frames, fps)."""
    header = {}
    with open(_header_path(path)) as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                header[key] = value
    try:
        w = int(header["width"])
        h = int(header["height"])
        count = int(header["frames"])
        fps = float(header["fps"])
    except (KeyError, ValueError) as exc:
        raise StructuralError(f"malformed raw video header {_header_path(path)}") from exc
    expected = w * h * count
    size = os.path.getsize(path)
    if size != expected:
        raise StructuralError(
            f"raw video {path}: expected {expected} bytes for "
            f"{count} frames of {w}x{h}, found {size}"
        )
    data = np.fromfile(path, dtype=np.uint8).reshape(count, h, w)
    return [Frame(data[i]) for i in range(count)], fps
