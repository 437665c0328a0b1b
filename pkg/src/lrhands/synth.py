"""Synthetic two-hand scenes with pixel-exact ground truth.

Scenes render two elliptical "hand" blobs over a flat background, with
optional global illumination shifts and scheduled merges.  They are cheap
stand-ins for annotated egocentric footage in tests and acceptance runs:
every frame comes with its exact 3-class mask and a truth occlusion flag.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, stats

from .errors import DataError
from .imaging import Frame, save_frame, save_lrmask

_EIGHT = np.ones((3, 3), dtype=bool)

SKIN_LEFT = (198, 134, 108)
SKIN_RIGHT = (212, 148, 118)
BACKGROUND = (70, 95, 130)


@dataclass
class BlobTrack:
    """Linear trajectory of one elliptical blob, optionally reversing."""

    start: tuple                 # (x, y) center at frame 0
    velocity: tuple = (0.0, 0.0)  # (dx, dy) per frame
    semi_axes: tuple = (26.0, 12.0)
    angle: float = 0.7           # radians, anticlockwise from bottom border
    angle_velocity: float = 0.0
    reverse_at: int = None       # frame index where the velocity flips

    def position(self, t):
        if self.reverse_at is None or t <= self.reverse_at:
            steps_fwd, steps_back = t, 0
        else:
            steps_fwd, steps_back = self.reverse_at, t - self.reverse_at
        x = self.start[0] + self.velocity[0] * (steps_fwd - steps_back)
        y = self.start[1] + self.velocity[1] * (steps_fwd - steps_back)
        return x, y

    def orientation(self, t):
        return min(max(self.angle + self.angle_velocity * t, 0.01), math.pi - 0.01)


@dataclass
class SceneParams:
    left: BlobTrack
    right: BlobTrack
    width: int = 200
    height: int = 150
    n_frames: int = 30
    left_color: tuple = SKIN_LEFT
    right_color: tuple = SKIN_RIGHT
    background: tuple = BACKGROUND
    # (first_frame, (dr, dg, db)) applied to every pixel from that frame on;
    # an empty list keeps the base colors throughout.
    regimes: list = field(default_factory=list)
    require_clear_start: bool = True
    seed: int = 0


def _ellipse_mask(width, height, center, semi_axes, angle):
    """Pixels inside a rotated ellipse (bottom-border angle convention)."""
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    dx = xs - center[0]
    dy = ys - center[1]
    # y grows downward, so the visual anticlockwise angle flips its sign here
    cos_t, sin_t = math.cos(angle), math.sin(angle)
    u = (dx * cos_t - dy * sin_t) / semi_axes[0]
    v = (dx * sin_t + dy * cos_t) / semi_axes[1]
    norm = u * u + v * v
    return norm <= 1.0, norm


def _touching(left, right):
    if not left.any() or not right.any():
        return False
    return bool((ndimage.binary_dilation(left, structure=_EIGHT) & right).any())


def generate_scene(params):
    """Render a scene to a list of (Frame, truth LRMask, occlusion flag).

    Truth masks label overlap pixels by the blob whose normalized ellipse
    distance is smaller (ties to left), so rendering and truth agree
    pixel-exactly.  The flag turns true on the first frame the blobs touch.
    """
    frames = []
    shift_schedule = sorted(params.regimes, key=lambda r: r[0])
    for t in range(params.n_frames):
        left, dist_l = _ellipse_mask(params.width, params.height,
                                     params.left.position(t), params.left.semi_axes,
                                     params.left.orientation(t))
        right, dist_r = _ellipse_mask(params.width, params.height,
                                      params.right.position(t), params.right.semi_axes,
                                      params.right.orientation(t))
        occluded = _touching(left, right)
        if t == 0 and params.require_clear_start and occluded:
            raise DataError("blobs overlap in the first frame of a clear-start scene")

        truth = np.zeros((params.height, params.width), dtype=np.uint8)
        truth[right] = 2
        truth[left] = 1
        both = left & right
        truth[both & (dist_r < dist_l)] = 2

        pixels = np.empty((params.height, params.width, 3), dtype=np.float64)
        pixels[:] = params.background
        pixels[truth == 1] = params.left_color
        pixels[truth == 2] = params.right_color
        shift = (0, 0, 0)
        for start, regime_shift in shift_schedule:
            if t >= start:
                shift = regime_shift
        pixels = np.clip(pixels + np.asarray(shift, dtype=np.float64), 0, 255)

        frames.append((Frame(pixels=pixels.astype(np.uint8), index=t,
                             name=f"frame_{t:04d}"),
                       truth, occluded))
    return frames


def merge_scene(n_frames=36, speed=2.0, width=200, height=150, seed=0, **kwargs):
    """Two blobs approach, merge around mid-scene, and separate again.

    Blobs sit low in the frame (clipping the bottom border like real hands)
    so the border-proximity post-filter keeps them.  The hands ride at
    slightly different heights, which tilts the merged blob the way real
    overlapping hands do instead of leaving it mirror-symmetric.
    """
    turn = n_frames // 2
    left = BlobTrack(start=(width * 0.30, height * 0.84), velocity=(speed, 0.0),
                     semi_axes=(26.0, 12.0), angle=0.7, reverse_at=turn)
    right = BlobTrack(start=(width * 0.70, height * 0.92), velocity=(-speed, 0.0),
                      semi_axes=(26.0, 12.0), angle=math.pi - 0.7, reverse_at=turn)
    return SceneParams(left=left, right=right, width=width, height=height,
                       n_frames=n_frames, seed=seed, **kwargs)


def drift_scene(n_frames=30, speed=1.0, width=200, height=150, seed=0, **kwargs):
    """Separated blobs drifting slowly along the bottom border; never touch."""
    left = BlobTrack(start=(width * 0.22, height * 0.88), velocity=(speed * 0.5, 0.0),
                     semi_axes=(24.0, 11.0), angle=0.7, angle_velocity=0.004,
                     reverse_at=n_frames // 2)
    right = BlobTrack(start=(width * 0.78, height * 0.88), velocity=(-speed * 0.5, 0.0),
                      semi_axes=(24.0, 11.0), angle=math.pi - 0.7, angle_velocity=-0.004,
                      reverse_at=n_frames // 2)
    return SceneParams(left=left, right=right, width=width, height=height,
                       n_frames=n_frames, seed=seed, **kwargs)


def mirrored_params(params):
    """Horizontal mirror of a scene: tracks, angles and colors swap sides."""
    def flip(track):
        return BlobTrack(
            start=(params.width - 1 - track.start[0], track.start[1]),
            velocity=(-track.velocity[0], track.velocity[1]),
            semi_axes=track.semi_axes,
            angle=math.pi - track.angle,
            angle_velocity=-track.angle_velocity,
            reverse_at=track.reverse_at,
        )
    return SceneParams(
        left=flip(params.right), right=flip(params.left),
        width=params.width, height=params.height, n_frames=params.n_frames,
        left_color=params.right_color, right_color=params.left_color,
        background=params.background, regimes=list(params.regimes),
        require_clear_start=params.require_clear_start, seed=params.seed,
    )


def two_regime_params(base=None, shift=(70, -40, -90), switch_frame=None):
    """Scene whose second half lives under a strong global color shift.

    The default shift maps the regime-B background onto regime A's skin
    color, which makes any single illumination model fail on the opposite
    regime while a two-model pool keeps both halves separable.
    """
    params = base or drift_scene(n_frames=24, left_color=(180, 130, 100),
                                 right_color=(180, 130, 100), background=(110, 170, 190))
    switch = switch_frame if switch_frame is not None else params.n_frames // 2
    params.regimes = [(switch, tuple(shift))]
    return params


def sample_truncated_maxwell(params, lo, hi, n, rng):
    """Inverse-CDF draws from a shifted Maxwell restricted to [lo, hi]."""
    dist = stats.maxwell(loc=params.d, scale=params.a)
    u = rng.uniform(dist.cdf(lo), dist.cdf(hi), size=n)
    return dist.ppf(u)


def sample_features(model, side, n, rng):
    """(x, theta) feature draws for one hand side of an identification model."""
    from .identify import HandLabel

    if side == HandLabel.LEFT:
        x = sample_truncated_maxwell(model.left_x, 0.0, 1.0, n, rng)
        theta = sample_truncated_maxwell(model.left_theta, 0.0, math.pi, n, rng)
    else:
        x = 1.0 - sample_truncated_maxwell(model.right_x, 0.0, 1.0, n, rng)
        theta = math.pi - sample_truncated_maxwell(model.right_theta, 0.0, math.pi, n, rng)
    return x, theta


def write_scene(scene, directory, params=None):
    """Write frames/, masks/ and scene.json for a generated scene."""
    root = Path(directory)
    frames_dir = root / "frames"
    masks_dir = root / "masks"
    frames_dir.mkdir(parents=True, exist_ok=True)
    masks_dir.mkdir(parents=True, exist_ok=True)

    flags = {}
    for frame, truth, occluded in scene:
        save_frame(frame, frames_dir / f"{frame.name}.png")
        save_lrmask(truth, masks_dir / f"{frame.name}.png")
        flags[frame.name] = bool(occluded)

    meta = {"occlusion_flags": flags}
    if params is not None:
        meta["params"] = asdict(params)
    (root / "scene.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return frames_dir, masks_dir
