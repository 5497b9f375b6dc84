"""Synthetic gesture clips: a bright hand-blob swept along scripted paths.

Stands in for a camera.  Each clip renders a soft-edged disc moving along a
piecewise-linear waypoint path ("Z", "+", "X" by default) over a dark
background, with optional pixel noise, per-clip placement offsets, waypoint
jitter and per-segment speed variation.  Rendering is deterministic for a
fixed seed; dataset generation derives one child seed per clip from numpy's
SeedSequence so train/test splits never share streams.

Ground truth records, for each consecutive-frame difference, the midpoint of
the two blob centers in block-grid coordinates: that midpoint is where the
motion energy of the difference image actually sits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .imaging import DEFAULT_HEIGHT, DEFAULT_WIDTH, Frame

__all__ = [
    "GestureScript",
    "SynthConfig",
    "Clip",
    "render_gesture",
    "make_dataset",
    "dataset_hash",
    "standard_scripts",
    "MAX_FPS",
]

MAX_FPS = 10.0


@dataclass(frozen=True)
class GestureScript:
    """A gesture as normalized [0,1]^2 waypoints plus blob appearance.

    ``points_per_segment`` optionally fixes the relative time spent on each
    leg; by default time is split proportionally to leg length.  A script
    whose waypoints all coincide renders a static scene.
    """

    label: str
    waypoints: tuple[tuple[float, float], ...]
    points_per_segment: tuple[int, ...] | None = None
    blob_size: float = 160.0
    intensity: float = 190.0

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise StructuralError("a gesture script needs at least one waypoint")
        if self.points_per_segment is not None and len(self.points_per_segment) != max(
            len(self.waypoints) - 1, 1
        ):
            raise StructuralError("points_per_segment must list one entry per leg")


@dataclass(frozen=True)
class SynthConfig:
    """Rendering parameters shared by every clip of a dataset."""

    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    fps: float = MAX_FPS
    frames_per_gesture: int = 50
    noise_sigma: float = 2.0
    background: float = 30.0
    jitter_sigma: float = 0.015
    placement_range: float = 0.06
    speed_variation: float = 0.3
    grid_block: int = 16  # pixel-to-grid scale used for the ground-truth path

    def __post_init__(self):
        if self.fps <= 0 or self.fps > MAX_FPS:
            raise StructuralError(f"fps must lie in (0, {MAX_FPS}], got {self.fps}")
        if self.frames_per_gesture < 2:
            raise StructuralError("a clip needs at least two frames")
        if min(self.width, self.height) <= 0:
            raise StructuralError("frame dimensions must be positive")


@dataclass(frozen=True)
class Clip:
    """One rendered gesture: frames, per-difference ground truth, metadata."""

    label: str
    frames: list[Frame]
    truth: np.ndarray          # (n_frames - 1, 2) grid coordinates
    truth_segments: np.ndarray  # leg index feeding each difference
    fps: float
    seed: int


def standard_scripts(blob_size: float = 160.0, intensity: float = 190.0) -> list[GestureScript]:
    """The three stock gestures; leg order is the stroke order of the hand."""
    return [
        GestureScript(
            "+",
            waypoints=((0.15, 0.5), (0.85, 0.5), (0.5, 0.15), (0.5, 0.85)),
            blob_size=blob_size,
            intensity=intensity,
        ),
        GestureScript(
            "X",
            waypoints=((0.15, 0.15), (0.85, 0.85), (0.85, 0.15), (0.15, 0.85)),
            blob_size=blob_size,
            intensity=intensity,
        ),
        GestureScript(
            "Z",
            waypoints=((0.15, 0.2), (0.85, 0.2), (0.15, 0.8), (0.85, 0.8)),
            blob_size=blob_size,
            intensity=intensity,
        ),
    ]


def _blob_patch(frame: np.ndarray, cx: float, cy: float, radius: float, amp: float) -> None:
    """Add a soft-edged disc in place; edge ramp is a quarter of the radius."""
    edge = max(radius * 0.25, 1.0)
    h, w = frame.shape
    x0 = max(int(np.floor(cx - radius - edge)), 0)
    x1 = min(int(np.ceil(cx + radius + edge)) + 1, w)
    y0 = max(int(np.floor(cy - radius - edge)), 0)
    y1 = min(int(np.ceil(cy + radius + edge)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.ogrid[y0:y1, x0:x1]
    dist = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
    falloff = np.clip((radius + edge - dist) / edge, 0.0, 1.0)
    frame[y0:y1, x0:x1] += amp * falloff


def _positions(
    script: GestureScript, cfg: SynthConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame blob centers (pixels) and the leg index of each frame."""
    pts = np.asarray(script.waypoints, dtype=np.float64)
    if len(pts) == 1:
        pts = np.vstack([pts, pts])
    offset = rng.uniform(-cfg.placement_range, cfg.placement_range, size=2)
    jitter = rng.normal(0.0, cfg.jitter_sigma, size=pts.shape)
    pts = pts + offset + jitter

    legs = np.diff(pts, axis=0)
    lengths = np.linalg.norm(legs, axis=1)
    if script.points_per_segment is not None:
        weights = np.asarray(script.points_per_segment, dtype=np.float64)
    else:
        weights = lengths.copy()
    weights = np.maximum(weights, 1e-9)
    weights *= rng.uniform(1.0 - cfg.speed_variation, 1.0 + cfg.speed_variation,
                           size=weights.shape)
    breaks = np.concatenate([[0.0], np.cumsum(weights)]) / weights.sum()

    t = np.linspace(0.0, 1.0, cfg.frames_per_gesture)
    x = np.interp(t, breaks, pts[:, 0])
    y = np.interp(t, breaks, pts[:, 1])
    seg = np.clip(np.searchsorted(breaks, t, side="right") - 1, 0, len(legs) - 1)
    scale = np.array([cfg.width, cfg.height], dtype=np.float64)
    return np.column_stack([x, y]) * scale, seg


def render_gesture(
    script: GestureScript, cfg: SynthConfig, seed: int
) -> Clip:
    """Render one clip; deterministic for a fixed (script, cfg, seed)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    centers, seg = _positions(script, cfg, rng)
    radius = script.blob_size / 2.0
    frames = []
    for i in range(cfg.frames_per_gesture):
        canvas = np.full((cfg.height, cfg.width), cfg.background, dtype=np.float64)
        _blob_patch(canvas, centers[i, 0], centers[i, 1], radius, script.intensity)
        if cfg.noise_sigma > 0:
            canvas += rng.normal(0.0, cfg.noise_sigma, size=canvas.shape)
        frames.append(Frame(np.clip(np.rint(canvas), 0, 255).astype(np.uint8)))

    mid = (centers[:-1] + centers[1:]) / 2.0
    truth = mid / cfg.grid_block
    return Clip(
        label=script.label,
        frames=frames,
        truth=truth,
        truth_segments=seg[1:].copy(),
        fps=cfg.fps,
        seed=seed,
    )


def make_dataset(
    scripts: list[GestureScript],
    per_class: int,
    cfg: SynthConfig,
    seed: int,
) -> list[Clip]:
    """``per_class`` clips per script, each from its own derived seed."""
    if per_class < 1:
        raise StructuralError("per_class must be >= 1")
    clips = []
    for ci, script in enumerate(scripts):
        for k in range(per_class):
            child = np.random.SeedSequence(seed, spawn_key=(ci, k))
            clip_seed = int(child.generate_state(1, np.uint64)[0])
            clips.append(render_gesture(script, cfg, clip_seed))
    return clips


def dataset_hash(clips: list[Clip]) -> str:
    """Content hash over every frame of every clip (reproducibility check)."""
    h = hashlib.sha256()
    for clip in clips:
        h.update(clip.label.encode())
        for f in clip.frames:
            h.update(f.pixels.tobytes())
    return h.hexdigest()
