"""Per-frame orchestration: segment, post-process, split occlusions, identify.

State flows frame to frame: the previous left/right masks drive occlusion
detection and the previous superpixels drive splitting, so frames of one
video are processed strictly in order.  Distinct videos are independent.
"""

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DataError, StaleStateError
from .geometry import Contour, extract_contours, extract_features, filter_contours, fit_ellipse
from .identify import DEFAULT_MODEL, HandLabel, assign_ids, likelihood_ratio
from .imaging import resample
from .occlusion import LRState, is_occlusion, split_occlusion
from .pool import segment
from .superpixels import compute_superpixels

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    k_fuse: int = 5
    fuse_lambda: float = 0.9
    threshold: float = 0.5
    sp_target_count: int = 300
    sp_m: float = 50.0
    sp_iterations: int = 10
    min_area_factor: float = 0.1
    margin_factor: float = 0.05
    working_width: int = 600
    sample_stride: int = 1
    split_enabled: bool = True

    def __post_init__(self):
        if self.k_fuse < 1:
            raise DataError("k_fuse must be >= 1")
        if not 0.0 < self.fuse_lambda < 1.0:
            raise DataError("fuse_lambda must be in (0, 1)")
        if not 0.0 < self.threshold < 1.0:
            raise DataError("threshold must be in (0, 1)")
        if self.working_width < 1 or self.sample_stride < 1:
            raise DataError("working_width and sample_stride must be >= 1")

    @classmethod
    def from_file(cls, path, **overrides):
        """Config file values (JSON key-value) with CLI overrides on top."""
        values = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class SegmentRecord:
    contour: Contour
    label: HandLabel
    features: object
    ratio: float


@dataclass
class FrameResult:
    frame_index: int
    lr_mask: np.ndarray        # (h, w) uint8 {0, 1, 2}
    occlusion_flag: bool
    segments: list = field(default_factory=list)


def _contour_features(contour, frame_size):
    try:
        return extract_features(fit_ellipse(contour), frame_size)
    except DataError:
        return None


def _part_contour(part_mask):
    """Wrap a split part as a contour: features come from its largest piece."""
    pieces = extract_contours(part_mask)
    if not pieces:
        return None
    largest = max(pieces, key=lambda c: c.area)
    return Contour(boundary=largest.boundary, mask=part_mask,
                   area=int(part_mask.sum()))


def process_frame(state, frame, config, pool, lr_model=DEFAULT_MODEL):
    """Run the full chain on one frame; returns (FrameResult, new LRState)."""
    work = resample(frame, config.working_width)
    frame_size = (work.width, work.height)
    hand_mask = segment(pool, work, config.k_fuse, config.fuse_lambda, config.threshold)
    filtered = filter_contours(extract_contours(hand_mask), frame_size,
                               config.min_area_factor, config.margin_factor)

    occluded = False
    sp_curr = None
    candidates = []
    if filtered:
        blob = filtered[0]
        if config.split_enabled and is_occlusion(blob.mask, state):
            sp_curr = compute_superpixels(work, config.sp_target_count,
                                          config.sp_m, config.sp_iterations)
            try:
                left_part, right_part = split_occlusion(blob.mask, state, sp_curr, config.sp_m)
                occluded = True
                # Identify the split parts; other blobs are noise during a merge.
                for part in (left_part, right_part):
                    if part.any():
                        contour = _part_contour(part)
                        if contour is not None:
                            candidates.append(contour)
            except StaleStateError as exc:
                log.warning("frame %d: %s; processing without split", frame.index, exc)
        if not occluded:
            candidates = filtered

    segments = []
    for contour in candidates:
        feats = _contour_features(contour, frame_size)
        if feats is not None:
            segments.append((contour, feats))

    records = []
    for contour, label in assign_ids(segments, lr_model):
        feats = next(f for c, f in segments if c is contour)
        records.append(SegmentRecord(contour=contour, label=label, features=feats,
                                     ratio=likelihood_ratio(feats, lr_model)))

    lr_mask = np.zeros((work.height, work.width), dtype=np.uint8)
    left_mask = right_mask = None
    for record in records:
        value = 1 if record.label == HandLabel.LEFT else 2
        lr_mask[record.contour.mask] = value
        if record.label == HandLabel.LEFT:
            left_mask = record.contour.mask
        else:
            right_mask = record.contour.mask

    both = left_mask is not None and right_mask is not None
    if both and sp_curr is None:
        # Eagerly prepare the split input for the next frame.
        sp_curr = compute_superpixels(work, config.sp_target_count,
                                      config.sp_m, config.sp_iterations)
    new_state = LRState(left=left_mask, right=right_mask,
                        superpixels_prev=sp_curr if both else None,
                        frame_index=frame.index)
    result = FrameResult(frame_index=frame.index, lr_mask=lr_mask,
                         occlusion_flag=occluded, segments=records)
    return result, new_state


def process_video(frames, config, pool, lr_model=DEFAULT_MODEL):
    """Process every sample_stride-th frame in order with threaded state."""
    if len(frames) == 0:
        raise DataError("empty frame sequence")
    dims = (frames[0].width, frames[0].height)
    results = []
    state = LRState()
    for frame in frames[::config.sample_stride]:
        if (frame.width, frame.height) != dims:
            raise DataError(
                f"frame {frame.index}: dimensions {frame.width}x{frame.height} "
                f"differ from first frame {dims[0]}x{dims[1]}")
        result, state = process_frame(state, frame, config, pool, lr_model)
        results.append(result)
    return results
