import numpy as np
import pytest

from lrhands.errors import DataError, StaleStateError
from lrhands.imaging import Frame
from lrhands.occlusion import LRState, is_occlusion, split_occlusion
from lrhands.superpixels import (Superpixel, SuperpixelSet,
                                 compute_superpixels, superpixel_distance)

from conftest import random_blob_mask


def rect_mask(shape, r0, r1, c0, c1):
    mask = np.zeros(shape, dtype=bool)
    mask[r0:r1, c0:c1] = True
    return mask


def superpixel_set_from_labels(label_map, lab=None):
    """Build a SuperpixelSet directly from a label map (tests only)."""
    h, w = label_map.shape
    xs, ys = np.meshgrid(np.arange(w), np.arange(h))
    superpixels = []
    for i in np.unique(label_map):
        member = label_map == i
        pix = np.column_stack([xs[member], ys[member]])
        color = lab[member].mean(axis=0) if lab is not None else np.zeros(3)
        superpixels.append(Superpixel(id=int(i), mean_color=color,
                                      centroid=pix.mean(axis=0), pixels=pix))
    return SuperpixelSet(superpixels=superpixels,
                         label_map=label_map.astype(np.int32), params=(len(superpixels), 1.0, 0))


class TestIsOcclusion:
    def _state(self, shape=(20, 30)):
        return LRState(left=rect_mask(shape, 5, 15, 2, 12),
                       right=rect_mask(shape, 5, 15, 18, 28))

    def test_inside_band(self):
        state = self._state()
        blob = state.left | state.right
        # carve the blob down to 90% of the union area
        blob[5, 2:22] = False
        union = int((state.left | state.right).sum())
        inter = int((blob & (state.left | state.right)).sum())
        assert 0.8 * union <= inter <= 1.2 * union
        assert is_occlusion(blob, state)

    def test_below_band(self):
        state = self._state()
        blob = rect_mask((20, 30), 5, 15, 2, 12)  # left hand only: 50% overlap
        assert not is_occlusion(blob, state)

    def test_absent_hand_is_never_occlusion(self):
        shape = (20, 30)
        blob = rect_mask(shape, 5, 15, 2, 28)
        assert not is_occlusion(blob, LRState(left=None, right=rect_mask(shape, 5, 15, 18, 28)))
        assert not is_occlusion(blob, LRState(left=rect_mask(shape, 5, 15, 2, 12), right=None))
        assert not is_occlusion(blob, LRState())

    def test_matches_area_counting_oracle(self, rng):
        shape = (30, 40)
        agree = 0
        for _ in range(200):
            blob = random_blob_mask(rng, shape=shape, n_blobs=2, radius=(4, 9))
            left = random_blob_mask(rng, shape=shape, n_blobs=1, radius=(4, 9))
            right = random_blob_mask(rng, shape=shape, n_blobs=1, radius=(4, 9))
            state = LRState(left=left, right=right)
            union_area = 0
            inter_area = 0
            for r in range(shape[0]):
                for c in range(shape[1]):
                    in_union = left[r, c] or right[r, c]
                    union_area += in_union
                    inter_area += in_union and blob[r, c]
            expected = (union_area > 0
                        and 0.8 * union_area <= inter_area <= 1.2 * union_area)
            agree += is_occlusion(blob, state) == expected
        assert agree == 200


class TestSplitOcclusion:
    def test_zero_motion_reproduces_previous_masks(self):
        shape = (20, 30)
        left = rect_mask(shape, 5, 15, 2, 12)
        right = rect_mask(shape, 5, 15, 18, 28)
        blob = left | right

        labels = np.full(shape, 2, dtype=np.int32)
        labels[left] = 0
        labels[right] = 1
        sp = superpixel_set_from_labels(labels)
        state = LRState(left=left, right=right, superpixels_prev=sp)
        seg1, seg2 = split_occlusion(blob, state, sp, m=2.0)
        assert np.array_equal(seg1, left)
        assert np.array_equal(seg2, right)

    def test_orphan_superpixel_takes_nearest_anchor_side(self):
        shape = (20, 40)
        left = rect_mask(shape, 5, 15, 0, 10)
        right = rect_mask(shape, 5, 15, 24, 34)
        # current blob spans a middle gap not covered by either previous hand
        blob = rect_mask(shape, 5, 15, 0, 34)

        prev_labels = np.full(shape, 3, dtype=np.int32)
        prev_labels[left] = 0
        prev_labels[right] = 1
        prev = superpixel_set_from_labels(prev_labels)

        curr_labels = np.full(shape, 3, dtype=np.int32)
        curr_labels[left] = 0
        curr_labels[right] = 1
        middle = rect_mask(shape, 5, 15, 14, 20)  # centroid x=16.5: neither mask
        curr_labels[middle] = 2
        curr = superpixel_set_from_labels(curr_labels)

        state = LRState(left=left, right=right, superpixels_prev=prev)
        seg1, seg2 = split_occlusion(blob, state, curr, m=2.0)

        # oracle: closest previous anchor by the combined metric decides
        mid_sp = [s for s in curr.superpixels if s.id == 2][0]
        anchors = [s for s in prev.superpixels if s.id in (0, 1)]
        dists = [superpixel_distance(mid_sp, a, 2.0) for a in anchors]
        expected_left = anchors[int(np.argmin(dists))].id == 0
        assert np.array_equal(seg1 if expected_left else seg2,
                              (middle | left) if expected_left else (middle | right))

    def test_shifted_blob_mostly_keeps_sides(self, rng):
        # previous hands plus the same scene shifted 2 px right; superpixels
        # come from the real SLIC path on a rendered two-color frame
        shape = (40, 60)
        left_prev = rect_mask(shape, 10, 30, 5, 25)
        right_prev = rect_mask(shape, 10, 30, 31, 51)
        left_now = np.roll(left_prev, 2, axis=1)
        right_now = np.roll(right_prev, 2, axis=1)
        blob = left_now | right_now

        pixels = np.empty(shape + (3,), dtype=np.uint8)
        pixels[:] = (60, 90, 130)
        pixels[left_now] = (200, 130, 100)
        pixels[right_now] = (215, 145, 112)
        frame_now = Frame(pixels=pixels)

        prev_pixels = np.empty_like(pixels)
        prev_pixels[:] = (60, 90, 130)
        prev_pixels[left_prev] = (200, 130, 100)
        prev_pixels[right_prev] = (215, 145, 112)
        sp_prev = compute_superpixels(Frame(pixels=prev_pixels), target_count=60, m=1.0)
        sp_now = compute_superpixels(frame_now, target_count=60, m=1.0)

        state = LRState(left=left_prev, right=right_prev, superpixels_prev=sp_prev)
        seg1, seg2 = split_occlusion(blob, state, sp_now, m=1.0)
        correct = (seg1 & left_now).sum() + (seg2 & right_now).sum()
        assert correct / blob.sum() >= 0.9

    def test_outputs_disjoint_and_inside_blob(self, rng):
        shape = (30, 40)
        left = random_blob_mask(rng, shape=shape, n_blobs=1, radius=(6, 9))
        right = random_blob_mask(rng, shape=shape, n_blobs=1, radius=(6, 9)) & ~left
        if not right.any():
            right = rect_mask(shape, 0, 5, 0, 5) & ~left
        blob = random_blob_mask(rng, shape=shape, n_blobs=2, radius=(6, 10))
        labels = np.zeros(shape, dtype=np.int32)
        labels[15:, :] = 1
        labels[:, 20:] += 2
        sp = superpixel_set_from_labels(labels)
        state = LRState(left=left, right=right, superpixels_prev=sp)
        seg1, seg2 = split_occlusion(blob, state, sp, m=1.0)
        assert not (seg1 & seg2).any()
        assert not (seg1 & ~blob).any()
        assert not (seg2 & ~blob).any()

    def test_determinism(self):
        shape = (20, 30)
        left = rect_mask(shape, 5, 15, 2, 12)
        right = rect_mask(shape, 5, 15, 18, 28)
        blob = rect_mask(shape, 5, 15, 2, 28)
        labels = np.full(shape, 2, dtype=np.int32)
        labels[left] = 0
        labels[right] = 1
        labels[rect_mask(shape, 5, 15, 12, 18)] = 3  # gap strip, needs anchors
        sp = superpixel_set_from_labels(labels)
        state = LRState(left=left, right=right, superpixels_prev=sp)
        a1, b1 = split_occlusion(blob, state, sp, m=2.0)
        a2, b2 = split_occlusion(blob, state, sp, m=2.0)
        assert np.array_equal(a1, a2) and np.array_equal(b1, b2)
        assert (a1 | b1).sum() > 0

    def test_stale_state_raises(self):
        shape = (20, 30)
        left = rect_mask(shape, 5, 15, 2, 12)
        right = rect_mask(shape, 5, 15, 18, 28)
        blob = left | right
        # previous superpixels all centered outside both hands
        labels = np.zeros(shape, dtype=np.int32)
        sp_prev = superpixel_set_from_labels(labels)  # centroid at frame center
        sp_prev.superpixels[0].centroid[:] = (15.0, 1.0)  # top band: no hands
        sp_curr = superpixel_set_from_labels(
            np.
            full(shape, 0, dtype=np.int32))
        state = LRState(left=left, right=right, superpixels_prev=sp_prev)
        with pytest.raises(StaleStateError, match="stale state"):
            split_occlusion(blob, state, sp_curr, m=1.0)

    def test_missing_state_is_data_error(self):
        shape = (10, 10)
        blob = rect_mask(shape, 2, 8, 2, 8)
        sp = superpixel_set_from_labels(np.zeros(shape, dtype=np.int32))
        with pytest.raises(DataError):
            split_occlusion(blob, LRState(left=None, right=blob, superpixels_prev=sp), sp, 1.0)
