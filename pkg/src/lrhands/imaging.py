"""Frame ingestion, resampling and color conversions.

Conventions used throughout the package:

* images are numpy arrays of shape ``(height, width, 3)``, uint8 RGB,
  row-major (row = y, growing downward; column = x, growing rightward);
* LAB images are float64 arrays in the CIELAB sRGB/D65 convention
  (L in [0, 100], a/b roughly in [-128, 127]);
* HSV channels are floats in [0, 1].
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError

# sRGB -> XYZ (D65) matrix and white point.  Rows sum to the white point,
# so the gray axis maps to a = b = 0 up to float rounding.
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE = np.array([0.95047, 1.0, 1.08883])

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


@dataclass(frozen=True)
class Frame:
    """One RGB video frame plus its position in the sequence."""

    pixels: np.ndarray  # (h, w, 3) uint8
    index: int = 0
    name: str = ""

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise DataError(f"frame pixels must be (h, w, 3), got {p.shape}")
        if self.index < 0:
            raise DataError("frame index must be >= 0")

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


@dataclass(frozen=True)
class GlobalFeature:
    """L1-normalized flattened joint HSV histogram of a whole frame."""

    bins: np.ndarray  # (h_bins * s_bins * v_bins,) float64, sums to 1
    bin_config: tuple = (8, 8, 8)

    def __post_init__(self):
        h, s, v = self.bin_config
        if self.bins.shape != (h * s * v,):
            raise DataError("histogram length does not match bin_config")


def rgb_to_lab(rgb):
    """Convert 8-bit sRGB values to CIELAB (D65).

    Accepts a single ``(r, g, b)`` triple or an array whose last axis has
    size 3; returns a float64 array of the same leading shape.
    """
    arr = np.asarray(rgb, dtype=np.float64)
    c = arr / 255.0
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T / _WHITE

    delta = 6.0 / 29.0
    f = np.where(xyz > delta ** 3, np.cbrt(xyz), xyz / (3 * delta * delta) + 4.0 / 29.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def rgb_to_hsv(image):
    """Vectorized RGB -> HSV with all channels in [0, 1]."""
    c = np.asarray(image, dtype=np.float64) / 255.0
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    v = c.max(axis=-1)
    delta = v - c.min(axis=-1)
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)

    with np.errstate(invalid="ignore", divide="ignore"):
        rc = (v - r) / delta
        gc = (v - g) / delta
        bc = (v - b) / delta
    h = np.select(
        [delta == 0, r == v, g == v],
        [0.0, bc - gc, 2.0 + rc - bc],
        default=4.0 + gc - rc,
    )
    h = (h / 6.0) % 1.0
    return np.stack([h, s, v], axis=-1)


def hsv_histogram(frame, bin_config=(8, 8, 8)):
    """Joint HSV histogram of a frame, flattened H-major then S then V.

    The result is L1-normalized (bins sum to 1) so nearest-neighbor
    distances between histograms are independent of frame size.
    """
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    if pixels.size == 0:
        raise DataError("empty frame")
    h_bins, s_bins, v_bins = bin_config
    if min(h_bins, s_bins, v_bins) < 1:
        raise DataError("each bin count must be >= 1")

    hsv = rgb_to_hsv(pixels).reshape(-1, 3)
    # H lives on [0, 1); S and V include 1.0, which is clipped into the last bin.
    hi = np.minimum((hsv[:, 0] * h_bins).astype(np.int64), h_bins - 1)
    si = np.minimum((hsv[:, 1] * s_bins).astype(np.int64), s_bins - 1)
    vi = np.minimum((hsv[:, 2] * v_bins).astype(np.int64), v_bins - 1)
    flat = (hi * s_bins + si) * v_bins + vi
    counts = np.bincount(flat, minlength=h_bins * s_bins * v_bins).astype(np.float64)
    return GlobalFeature(bins=counts / counts.sum(), bin_config=tuple(bin_config))


def resample(frame, target_width):
    """Resize a frame to ``target_width`` preserving aspect ratio (bilinear)."""
    if target_width < 1:
        raise DataError("target_width must be >= 1")
    if target_width == frame.width:
        return frame
    target_height = max(1, int(round(frame.height * target_width / frame.width)))
    img = Image.fromarray(frame.pixels, mode="RGB").resize(
        (target_width, target_height), Image.BILINEAR
    )
    return Frame(pixels=np.asarray(img, dtype=np.uint8), index=frame.index, name=frame.name)


def resample_mask(mask, target_width):
    """Nearest-neighbor mask resize matching :func:`resample` geometry."""
    mask = np.asarray(mask)
    h, w = mask.shape
    if target_width == w:
        return mask
    target_height = max(1, int(round(h * target_width / w)))
    img = Image.fromarray(mask.astype(np.uint8), mode="L").resize(
        (target_width, target_height), Image.NEAREST
    )
    return np.asarray(img).astype(mask.dtype)


# ---------------------------------------------------------------------------
# File I/O: frame directories, binary masks, 3-class L/R masks
# ---------------------------------------------------------------------------

# Palette for 3-class mask files: 0 background, 1 left, 2 right.
LRMASK_PALETTE = {0: (0, 0, 0), 1: (220, 40, 40), 2: (40, 80, 220)}


def list_image_files(directory):
    """Image files of a directory in lexicographic order (= frame order)."""
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"not a directory: {root}")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)


def load_frame(path, index=0):
    img = Image.open(path).convert("RGB")
    return Frame(pixels=np.asarray(img, dtype=np.uint8), index=index, name=Path(path).stem)


def load_frames(directory):
    """Load a directory of numbered images as an ordered frame list."""
    files = list_image_files(directory)
    if not files:
        raise DataError(f"no image files in {directory}")
    return [load_frame(p, i) for i, p in enumerate(files)]


def save_frame(frame, path):
    Image.fromarray(frame.pixels, mode="RGB").save(path)


def load_binary_mask(path):
    """Load a mask file as boolean (any nonzero pixel counts as foreground)."""
    img = Image.open(path)
    if img.mode not in ("L", "P", "1"):
        img = img.convert("L")
    return np.asarray(img) > 0


def save_binary_mask(mask, path):
    Image.fromarray(mask.astype(np.uint8) * 255, mode="L").save(path)


def save_lrmask(values, path):
    """Write a 3-class mask as an indexed 8-bit PNG (palette 0/1/2)."""
    img = Image.fromarray(values.astype(np.uint8), mode="P")
    palette = []
    for i in range(256):
        palette.extend(LRMASK_PALETTE.get(i, (0, 0, 0)))
    img.putpalette(palette)
    img.save(path)


def load_lrmask(path):
    """Load a 3-class mask file back to a uint8 {0,1,2} array."""
    img = Image.open(path)
    if img.mode not in ("P", "L"):
        img = img.convert("L")
    values = np.asarray(img).astype(np.uint8)
    if values.max() > 2:
        raise DataError(f"mask {path} holds values outside {{0,1,2}}")
    return values


def load_lrmask_dir(directory):
    """Load a directory of L/R masks in either supported layout.

    Layout A: 3-class indexed files directly in ``directory``.
    Layout B: per-hand binary masks in ``directory/left`` and
    ``directory/right`` with matching filenames.
    Returns ``(names, masks)`` with masks as uint8 {0,1,2} arrays.
    """
    root = Path(directory)
    left_dir, right_dir = root / "left", root / "right"
    if left_dir.is_dir() and right_dir.is_dir():
        left_files = list_image_files(left_dir)
        names, masks = [], []
        for lf in left_files:
            rf = right_dir / lf.name
            if not rf.exists():
                raise DataError(f"missing right mask for {lf.name}")
            left = load_binary_mask(lf)
            right = load_binary_mask(rf)
            if left.shape != right.shape:
                raise DataError(f"left/right mask shapes differ for {lf.name}")
            out = np.zeros(left.shape, dtype=np.uint8)
            out[left] = 1
            out[right & ~left] = 2
            names.append(lf.stem)
            masks.append(out)
        if not names:
            raise DataError(f"no mask files in {left_dir}")
        return names, masks

    files = list_image_files(root)
    if not files:
        raise DataError(f"no mask files in {root}")
    return [p.stem for p in files], [load_lrmask(p) for p in files]
