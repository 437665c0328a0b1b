"""Binary random forest over per-pixel LAB features.

Trees are stored as flat node arrays (feature index, threshold, child
offsets, leaf probability) so a whole forest can be serialized as a handful
of numpy arrays and prediction can run vectorized over all pixels at once.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .imaging import Frame, rgb_to_lab

_N_FEATURES = 3  # L, a, b


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 10
    max_depth: int = 12
    min_leaf_samples: int = 5
    # Fraction of the training set given to each tree, drawn without
    # replacement; 1.0 hands every tree the full set (deterministic data).
    bootstrap_fraction: float = 0.8
    features_per_split: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise DataError("max_depth must be >= 1")
        if self.min_leaf_samples < 1:
            raise DataError("min_leaf_samples must be >= 1")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise DataError("bootstrap_fraction must be in (0, 1]")
        if not 1 <= self.features_per_split <= _N_FEATURES:
            raise DataError("features_per_split must be in [1, 3]")


@dataclass
class Forest:
    """Trained forest as flattened node arrays.

    ``feature[i] == -1`` marks node ``i`` as a leaf whose skin probability is
    ``prob[i]``; internal nodes route samples with ``value <= threshold`` to
    ``left`` and the rest to ``right``.  ``tree_starts`` holds each tree's
    root index into the shared arrays.
    """

    feature: np.ndarray      # (n_nodes,) int16
    threshold: np.ndarray    # (n_nodes,) float64
    left: np.ndarray         # (n_nodes,) int32
    right: np.ndarray        # (n_nodes,) int32
    prob: np.ndarray         # (n_nodes,) float64
    tree_starts: np.ndarray  # (n_trees,) int32
    params: ForestParams = field(default_factory=ForestParams)

    @property
    def n_trees(self):
        return len(self.tree_starts)

    def predict(self, features):
        """Mean leaf probability over all trees for (n, 3) LAB features."""
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        total = np.zeros(len(x))
        for root in self.tree_starts:
            idx = np.full(len(x), root, dtype=np.int64)
            while True:
                feat = self.feature[idx]
                rows = np.nonzero(feat >= 0)[0]
                if rows.size == 0:
                    break
                at = idx[rows]
                go_left = x[rows, feat[rows]] <= self.threshold[at]
                idx[rows] = np.where(go_left, self.left[at], self.right[at])
            total += self.prob[idx]
        return total / self.n_trees

    def to_arrays(self):
        """Serializable dict of flat arrays (used by the pool container)."""
        p = self.params
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "prob": self.prob,
            "tree_starts": self.tree_starts,
            "params": np.array([
                p.n_trees, p.max_depth, p.min_leaf_samples,
                p.bootstrap_fraction, p.features_per_split, p.rng_seed,
            ], dtype=np.float64),
        }

    @classmethod
    def from_arrays(cls, arrays):
        raw = arrays["params"]
        params = ForestParams(
            n_trees=int(raw[0]), max_depth=int(raw[1]), min_leaf_samples=int(raw[2]),
            bootstrap_fraction=float(raw[3]), features_per_split=int(raw[4]),
            rng_seed=int(raw[5]),
        )
        return cls(
            feature=np.asarray(arrays["feature"], dtype=np.int16),
            threshold=np.asarray(arrays["threshold"], dtype=np.float64),
            left=np.asarray(arrays["left"], dtype=np.int32),
            right=np.asarray(arrays["right"], dtype=np.int32),
            prob=np.asarray(arrays["prob"], dtype=np.float64),
            tree_starts=np.asarray(arrays["tree_starts"], dtype=np.int32),
            params=params,
        )


def best_split(values, labels, min_leaf):
    """Exhaustive best-gini split of one feature column.

    Candidate thresholds are midpoints between adjacent distinct sorted
    values.  Returns ``(score, threshold)`` with score = size-weighted child
    gini impurity, or ``None`` when no split keeps both children at
    ``min_leaf`` samples.
    """
    order = np.argsort(values, kind="stable")
    vs = values[order]
    ys = labels[order].astype(np.float64)
    n = len(vs)
    if n < 2 * min_leaf:
        return None

    cum_pos = np.cumsum(ys)
    i = np.arange(n - 1)
    valid = vs[:-1] < vs[1:]
    valid &= (i + 1 >= min_leaf) & (n - i - 1 >= min_leaf)
    if not valid.any():
        return None

    left_n = (i + 1).astype(np.float64)
    right_n = n - left_n
    left_pos = cum_pos[:-1]
    right_pos = cum_pos[-1] - left_pos
    pl = left_pos / left_n
    pr = right_pos / right_n
    score = (left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)) / n
    score[~valid] = np.inf
    best = int(np.argmin(score))
    return float(score[best]), float((vs[best] + vs[best + 1]) / 2.0)


class _TreeBuilder:
    def __init__(self, x, y, params, rng):
        self.x = x
        self.y = y
        self.p = params
        self.rng = rng
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.prob = []

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.prob.append(0.0)
        return len(self.feature) - 1

    def build(self, idx, depth):
        node = self._new_node()
        y = self.y[idx]
        n_pos = int(y.sum())
        self.prob[node] = n_pos / len(idx)
        if (depth >= self.p.max_depth or len(idx) < 2 * self.p.min_leaf_samples
                or n_pos == 0 or n_pos == len(idx)):
            return node

        if self.p.features_per_split >= _N_FEATURES:
            candidates = range(_N_FEATURES)
        else:
            candidates = np.sort(self.rng.choice(
                _N_FEATURES, size=self.p.features_per_split, replace=False))

        best = None
        for f in candidates:
            found = best_split(self.x[idx, f], y, self.p.min_leaf_samples)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            return node

        _, f, thr = best
        go_left = self.x[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(idx[go_left], depth + 1)
        self.right[node] = self.build(idx[~go_left], depth + 1)
        return node


def train_forest(features, labels, params=None):
    """Train a forest on (n, 3) LAB features with binary skin labels.

    Deterministic for a fixed ``params.rng_seed``: every tree draws its
    subsample and split features from an independently seeded substream, so
    the result does not depend on any execution schedule.
    """
    params = params or ForestParams()
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.asarray(labels).astype(np.int8).ravel()
    if x.ndim != 2 or x.shape[1] != _N_FEATURES or len(x) != len(y):
        raise DataError("features must be (n, 3) with matching labels")
    if len(np.unique(y)) < 2:
        raise DataError("degenerate training data: a single class")

    streams = np.random.SeedSequence(params.rng_seed).spawn(params.n_trees)
    feature, threshold, left, right, prob, starts = [], [], [], [], [], []
    for stream in streams:
        rng = np.random.default_rng(stream)
        if params.bootstrap_fraction >= 1.0:
            idx = np.arange(len(x))
        else:
            m = max(1, int(round(params.bootstrap_fraction * len(x))))
            idx = rng.choice(len(x), size=m, replace=False)
            if len(np.unique(y[idx])) < 2:
                idx = np.arange(len(x))  # tiny sets: fall back to the full set
        builder = _TreeBuilder(x, y, params, rng)
        builder.build(idx, 0)

        offset = len(feature)
        starts.append(offset)
        feature.extend(builder.feature)
        threshold.extend(builder.threshold)
        left.extend(v + offset if v >= 0 else -1 for v in builder.left)
        right.extend(v + offset if v >= 0 else -1 for v in builder.right)
        prob.extend(builder.prob)

    return Forest(
        feature=np.array(feature, dtype=np.int16),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        prob=np.array(prob, dtype=np.float64),
        tree_starts=np.array(starts, dtype=np.int32),
        params=params,
    )


def predict_map(forest, frame):
    """Per-pixel skin probability map for a frame.

    Duplicate colors are predicted once and scattered back, which makes
    frames with few distinct colors (synthetic scenes, compressed video)
    much cheaper than their pixel count suggests.
    """
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    h, w = pixels.shape[:2]
    codes = (
        pixels[..., 0].astype(np.int64) * 65536
        + pixels[..., 1].astype(np.int64) * 256
        + pixels[..., 2].astype(np.int64)
    ).ravel()
    unique, inverse = np.unique(codes, return_inverse=True)
    rgb = np.stack([unique // 65536, (unique // 256) % 256, unique % 256], axis=1)
    probs = forest.predict(rgb_to_lab(rgb))
    return probs[inverse].reshape(h, w)


def pixel_samples(frame, mask, cap_per_class=50000, rng=None):
    """LAB feature/label pairs from a (frame, binary mask) training pair.

    Uses every pixel up to ``cap_per_class`` per class; beyond the cap a
    class is subsampled without replacement to bound training time.
    """
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    mask = np.asarray(mask).astype(bool)
    if mask.shape != pixels.shape[:2]:
        raise DataError("mask dimensions do not match frame")
    lab = rgb_to_lab(pixels).reshape(-1, 3)
    y = mask.ravel()
    rng = rng or np.random.default_rng(0)

    keep = []
    for cls in (False, True):
        idx = np.nonzero(y == cls)[0]
        if cap_per_class and len(idx) > cap_per_class:
            idx = np.sort(rng.choice(idx, size=cap_per_class, replace=False))
        keep.append(idx)
    sel = np.concatenate(keep)
    return lab[sel], y[sel].astype(np.int8)
