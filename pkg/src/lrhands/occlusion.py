"""Hand-to-hand occlusion detection and superpixel-based splitting.

Both operations consume the previous frame's left/right segmentation; the
splitter additionally uses the previous and current superpixel partitions.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, StaleStateError
from .superpixels import SuperpixelSet, superpixel_distance

OCCLUSION_BAND = (0.8, 1.2)  # accepted intersection area, fraction of prev hands


@dataclass
class LRState:
    """Temporal state carried between frames of one video."""

    left: Optional[np.ndarray] = None             # (h, w) bool
    right: Optional[np.ndarray] = None
    superpixels_prev: Optional[SuperpixelSet] = None
    frame_index: int = -1

    @property
    def both_hands(self):
        return self.left is not None and self.right is not None


def is_occlusion(blob, state, band=OCCLUSION_BAND):
    """Decide whether a hand-like blob is a merged two-hand segment.

    True iff both previous hands exist and the blob's intersection with
    their union covers between band[0] and band[1] of that union's area.
    With no previous left or right hand the answer is always False, which
    also covers the first frame of a video.
    """
    if not state.both_hands:
        return False
    union = state.left | state.right
    union_area = int(union.sum())
    if union_area == 0:
        return False
    inter_area = int((np.asarray(blob, dtype=bool) & union).sum())
    return band[0] * union_area <= inter_area <= band[1] * union_area


def _rounded_centroid(superpixel, shape):
    cx, cy = np.rint(superpixel.centroid).astype(int)
    return min(max(cy, 0), shape[0] - 1), min(max(cx, 0), shape[1] - 1)


def split_occlusion(blob, state, sp_curr, m):
    """Split an occluded blob into (left, right) masks.

    Every current superpixel lying majority-inside the blob is assigned by,
    in order: its centroid falling in the previous left/right mask, else the
    side of the closest previous superpixel (restricted to those centered in
    a previous hand) under the combined color+space metric.  Blob pixels in
    superpixels that are not majority-inside stay unassigned.
    """
    if not state.both_hands:
        raise DataError("split requires both previous hands")
    if state.superpixels_prev is None:
        raise DataError("split requires previous superpixels")
    blob = np.asarray(blob, dtype=bool)
    shape = blob.shape

    anchors = []  # (superpixel, is_left) for prev superpixels centered in a hand
    for sp in state.superpixels_prev.superpixels:
        r, c = _rounded_centroid(sp, shape)
        if state.left[r, c]:
            anchors.append((sp, True))
        elif state.right[r, c]:
            anchors.append((sp, False))
    if not anchors:
        raise StaleStateError("stale state: no previous superpixel inside either hand")

    left_mask = np.zeros(shape, dtype=bool)
    right_mask = np.zeros(shape, dtype=bool)
    for sp in sp_curr.superpixels:
        xs, ys = sp.pixels[:, 0], sp.pixels[:, 1]
        inside = blob[ys, xs]
        if inside.sum() * 2 <= len(sp.pixels):
            continue
        r, c = _rounded_centroid(sp, shape)
        if state.left[r, c]:
            to_left = True
        elif state.right[r, c]:
            to_left = False
        else:
            best = None
            for anchor, is_left in anchors:
                d = superpixel_distance(sp, anchor, m)
                if best is None or d < best[0]:
                    best = (d, is_left)
            to_left = best[1]
        target = left_mask if to_left else right_mask
        target[ys[inside], xs[inside]] = True
    return left_mask, right_mask
