"""SLIC superpixels over (l, a, b, x, y) with a squared combined metric.

The clustering distance is ``color_dist**2 + m**2 * spatial_dist**2`` where
color runs over LAB differences and space over pixel coordinates; ``m`` is
the spatial weight.  Seeding, iteration order and tie-breaking are all
deterministic, so identical inputs always produce identical partitions.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .imaging import Frame, rgb_to_lab

log = logging.getLogger(__name__)

DEFAULT_TARGET_COUNT = 300
DEFAULT_SPATIAL_WEIGHT = 50.0
DEFAULT_ITERATIONS = 10

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass
class Superpixel:
    id: int
    mean_color: np.ndarray  # (3,) LAB
    centroid: np.ndarray    # (2,) float (x, y)
    pixels: np.ndarray      # (n, 2) int (x, y)


@dataclass
class SuperpixelSet:
    superpixels: list
    label_map: np.ndarray   # (h, w) int32, exact partition
    params: tuple           # (target_count, m, iterations)

    def __len__(self):
        return len(self.superpixels)


def superpixel_distance(a, b, m):
    """Squared combined distance between two superpixels (color + m^2 * space)."""
    color_sq = float(np.sum((a.mean_color - b.mean_color) ** 2))
    spatial_sq = float(np.sum((a.centroid - b.centroid) ** 2))
    return color_sq + m * m * spatial_sq


def _as_lab(frame):
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    if pixels.ndim == 3 and pixels.dtype == np.uint8:
        return rgb_to_lab(pixels)
    return np.asarray(pixels, dtype=np.float64)


def grid_seeds(frame, target_count):
    """Initial (l, a, b, x, y) cluster centers on a regular grid.

    Each seed is nudged to the lowest-gradient pixel of its 3x3 neighborhood
    so no center starts on an edge.
    """
    lab = _as_lab(frame)
    h, w = lab.shape[:2]
    if not 1 <= target_count <= h * w:
        raise DataError("target_count must be in [1, pixel count]")

    # Grid shape chosen so nx * ny lands at or just above target_count.
    ny = min(h, max(1, int(round(np.sqrt(target_count * h / w)))))
    nx = min(w, max(1, int(np.ceil(target_count / ny))))

    gy, gx = np.gradient(lab, axis=(0, 1))
    grad = (gy ** 2).sum(-1) + (gx ** 2).sum(-1)

    centers = []
    for i in range(ny):
        for j in range(nx):
            r = min(h - 1, int((i + 0.5) * h / ny))
            c = min(w - 1, int((j + 0.5) * w / nx))
            r0, r1 = max(0, r - 1), min(h, r + 2)
            c0, c1 = max(0, c - 1), min(w, c + 2)
            window = grad[r0:r1, c0:c1]
            k = int(np.argmin(window))
            r = r0 + k // window.shape[1]
            c = c0 + k % window.shape[1]
            centers.append([lab[r, c, 0], lab[r, c, 1], lab[r, c, 2], float(c), float(r)])
    return np.array(centers, dtype=np.float64)


def _iterate(lab, centers, m, iterations):
    """Windowed Lloyd iterations under the combined metric.

    Pixels are assigned to the closest center among those whose 2S window
    covers them; ties go to the lower cluster id.  Returns the label map.
    """
    h, w = lab.shape[:2]
    k = len(centers)
    step = np.sqrt(h * w / k)
    half = max(1, int(np.ceil(2 * step)))

    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    labels = np.zeros((h, w), dtype=np.int32)
    centers = centers.copy()

    for _ in range(iterations):
        dist = np.full((h, w), np.inf)
        for i in range(k):
            cx, cy = centers[i, 3], centers[i, 4]
            r0, r1 = max(0, int(cy) - half), min(h, int(cy) + half + 1)
            c0, c1 = max(0, int(cx) - half), min(w, int(cx) + half + 1)
            if r0 >= r1 or c0 >= c1:
                continue
            color_sq = ((lab[r0:r1, c0:c1] - centers[i, :3]) ** 2).sum(-1)
            spatial_sq = ((xs[c0:c1] - cx) ** 2)[None, :] + ((ys[r0:r1] - cy) ** 2)[:, None]
            d = color_sq + m * m * spatial_sq
            better = d < dist[r0:r1, c0:c1]
            dist[r0:r1, c0:c1][better] = d[better]
            labels[r0:r1, c0:c1][better] = i

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.float64)
        sums = np.empty((k, 5))
        for dim, values in enumerate([lab[..., 0], lab[..., 1], lab[..., 2],
                                      np.broadcast_to(xs, (h, w)),
                                      np.broadcast_to(ys[:, None], (h, w))]):
            sums[:, dim] = np.bincount(flat, weights=values.ravel(), minlength=k)
        occupied = counts > 0
        centers[occupied] = sums[occupied] / counts[occupied, None]
    return labels


def _enforce_connectivity(labels, lab):
    """Merge orphan fragments into the best adjacent superpixel.

    Every label keeps only its largest 4-connected component; smaller
    fragments join the spatially adjacent superpixel with the closest mean
    color (ties toward the lower label id).
    """
    labels = labels.copy()
    for _ in range(10):
        fragments = []
        for lbl in np.unique(labels):
            comp, n = ndimage.label(labels == lbl, structure=_FOUR_CONNECTED)
            if n <= 1:
                continue
            sizes = ndimage.sum_labels(np.ones_like(comp), comp, index=range(1, n + 1))
            keep = int(np.argmax(sizes)) + 1
            for frag in range(1, n + 1):
                if frag != keep:
                    fragments.append(comp == frag)
        if not fragments:
            return labels

        means = {lbl: lab[labels == lbl].mean(axis=0) for lbl in np.unique(labels)}
        for frag in fragments:
            ring = ndimage.binary_dilation(frag, structure=_FOUR_CONNECTED) & ~frag
            neighbor_ids = np.unique(labels[ring])
            own = labels[frag][0]
            neighbor_ids = neighbor_ids[neighbor_ids != own]
            if len(neighbor_ids) == 0:
                continue
            frag_color = lab[frag].mean(axis=0)
            dists = [np.sum((means[nid] - frag_color) ** 2) for nid in neighbor_ids]
            labels[frag] = int(neighbor_ids[int(np.argmin(dists))])
    log.warning("connectivity enforcement did not settle in 10 passes")
    return labels


def compute_superpixels(frame, target_count=DEFAULT_TARGET_COUNT,
                        m=DEFAULT_SPATIAL_WEIGHT, iterations=DEFAULT_ITERATIONS,
                        enforce_connectivity=True):
    """SLIC partition of a frame into ~target_count superpixels."""
    if m <= 0:
        raise DataError("spatial weight m must be positive")
    lab = _as_lab(frame)
    centers = grid_seeds(lab, target_count)
    labels = _iterate(lab, centers, m, iterations)
    if enforce_connectivity:
        labels = _enforce_connectivity(labels, lab)

    # Relabel contiguously and build the superpixel records.
    h, w = labels.shape
    unique, dense = np.unique(labels, return_inverse=True)
    dense = dense.reshape(h, w).astype(np.int32)
    xs, ys = np.meshgrid(np.arange(w), np.arange(h))
    superpixels = []
    order = np.argsort(dense.ravel(), kind="stable")
    bounds = np.searchsorted(dense.ravel()[order], np.arange(len(unique) + 1))
    flat_x = xs.ravel()[order]
    flat_y = ys.ravel()[order]
    lab_flat = lab.reshape(-1, 3)[order]
    for i in range(len(unique)):
        lo, hi = bounds[i], bounds[i + 1]
        pix = np.column_stack([flat_x[lo:hi], flat_y[lo:hi]])
        superpixels.append(Superpixel(
            id=i,
            mean_color=lab_flat[lo:hi].mean(axis=0),
            centroid=pix.mean(axis=0).astype(np.float64),
            pixels=pix,
        ))
    return SuperpixelSet(superpixels=superpixels, label_map=dense,
                         params=(target_count, m, iterations))


def save_label_map(sp_set, path):
    """Debug export: the label map as a 16-bit single-channel PNG."""
    from PIL import Image

    if len(sp_set) > 65535:
        raise DataError("label map export supports at most 65535 superpixels")
    Image.fromarray(sp_set.label_map.astype(np.uint16)).save(path)
