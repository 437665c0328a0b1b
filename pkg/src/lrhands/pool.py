"""Pool of illumination models: build, recommend, fuse, segment.

Each model pairs a pixel forest with the global HSV histogram of the frame
it was trained on.  At test time the histogram of the incoming frame picks
the nearest K models (exact linear scan; pools are small) and their
probability maps are fused with geometrically decaying weights.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError
from .forest import Forest, ForestParams, pixel_samples, predict_map, train_forest
from .imaging import GlobalFeature, hsv_histogram

log = logging.getLogger(__name__)

POOL_MAGIC = "LRHANDS-POOL"
POOL_VERSION = 1

DEFAULT_K = 5          # closest models to fuse
DEFAULT_LAMBDA = 0.9   # decaying weight factor
DEFAULT_THRESHOLD = 0.5


@dataclass
class IlluminationModel:
    forest: Forest
    global_feature: GlobalFeature
    source_id: str


class ModelPool:
    """Ordered illumination models plus an exact NN index over their features."""

    def __init__(self, models):
        if not models:
            raise DataError("pool needs at least one model")
        self.models = list(models)
        self.bin_config = self.models[0].global_feature.bin_config
        if any(m.global_feature.bin_config != self.bin_config for m in self.models):
            raise DataError("all models must share one bin_config")
        self._features = np.stack([m.global_feature.bins for m in self.models])

    def __len__(self):
        return len(self.models)


def build_pool(pairs, forest_params=None, bin_config=(8, 8, 8), cap_per_class=50000):
    """Train one illumination model per (frame, binary mask) pair.

    Pairs whose mask holds a single class are skipped with a warning; a
    dimension mismatch is an error.  Raises when every pair was skipped.
    """
    forest_params = forest_params or ForestParams()
    models = []
    for i, (frame, mask) in enumerate(pairs):
        mask = np.asarray(mask).astype(bool)
        if mask.shape != frame.pixels.shape[:2]:
            raise DataError(f"pair {i}: mask dimensions do not match frame")
        if mask.all() or not mask.any():
            log.warning("pair %d (%s): single-class mask, skipping", i, frame.name)
            continue
        rng = np.random.default_rng(forest_params.rng_seed + i)
        x, y = pixel_samples(frame, mask, cap_per_class=cap_per_class, rng=rng)
        seeded = ForestParams(**{**forest_params.__dict__,
                                 "rng_seed": forest_params.rng_seed + i})
        models.append(IlluminationModel(
            forest=train_forest(x, y, seeded),
            global_feature=hsv_histogram(frame, bin_config),
            source_id=frame.name or str(i),
        ))
    if not models:
        raise DataError("all training pairs were skipped")
    return ModelPool(models)


def recommend(pool, gf, k):
    """Indexes of the k nearest models by Euclidean histogram distance.

    Sorted by non-decreasing distance; ties break toward the lower model
    index (stable sort over the insertion order).
    """
    if not 1 <= k <= len(pool):
        raise DataError(f"k exceeds pool size ({k} > {len(pool)})")
    if gf.bin_config != pool.bin_config:
        raise DataError("query bin_config does not match pool")
    dist = np.linalg.norm(pool._features - gf.bins[None, :], axis=1)
    return list(np.argsort(dist, kind="stable")[:k])


def fuse(maps, lam=DEFAULT_LAMBDA):
    """Normalized weighted average of probability maps, nearest first.

    Map j (1-based rank) carries weight lam**j, i.e. {0.9, 0.81, 0.729, ...}
    for the default 0.9.
    """
    if not 0.0 < lam < 1.0:
        raise DataError("lambda must be in (0, 1)")
    if len(maps) == 0:
        raise DataError("fuse needs at least one map")
    arrays = [np.asarray(m, dtype=np.float64) for m in maps]
    if any(m.shape != arrays[0].shape for m in arrays):
        raise DataError("probability map dimensions differ")
    stack = np.stack(arrays)
    weights = lam ** np.arange(1, len(maps) + 1)
    return np.tensordot(weights, stack, axes=1) / weights.sum()


def fused_probability(pool, frame, k=DEFAULT_K, lam=DEFAULT_LAMBDA):
    """Recommend k models for the frame and fuse their probability maps."""
    gf = hsv_histogram(frame, pool.bin_config)
    ranked = recommend(pool, gf, k)
    return fuse([predict_map(pool.models[j].forest, frame) for j in ranked], lam)


def segment(pool, frame, k=DEFAULT_K, lam=DEFAULT_LAMBDA, threshold=DEFAULT_THRESHOLD):
    """Binary hand mask of a frame: fused probability thresholded.

    Ties at the threshold classify as background.
    """
    if not 0.0 < threshold < 1.0:
        raise DataError("threshold must be in (0, 1)")
    return fused_probability(pool, frame, k, lam) > threshold


# ---------------------------------------------------------------------------
# Pool container (versioned npz)
# ---------------------------------------------------------------------------

def save_pool(pool, path):
    entries = {
        "magic": np.array(POOL_MAGIC),
        "version": np.array(POOL_VERSION),
        "n_models": np.array(len(pool)),
        "bin_config": np.array(pool.bin_config),
        "source_ids": np.array([m.source_id for m in pool.models]),
        "gf": pool._features,
    }
    for i, model in enumerate(pool.models):
        for key, arr in model.forest.to_arrays().items():
            entries[f"forest{i}_{key}"] = arr
    np.savez_compressed(path, **entries)


def load_pool(path):
    try:
        data = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise FormatError(f"cannot read pool container {path}: {exc}") from exc
    with data:
        if "magic" not in data or str(data["magic"]) != POOL_MAGIC:
            raise FormatError(f"{path} is not a pool container (bad magic)")
        if int(data["version"]) != POOL_VERSION:
            raise FormatError(f"unsupported pool format version {int(data['version'])}")
        bin_config = tuple(int(v) for v in data["bin_config"])
        gf = data["gf"]
        ids = [str(s) for s in data["source_ids"]]
        models = []
        for i in range(int(data["n_models"])):
            arrays = {key: data[f"forest{i}_{key}"]
                      for key in ("feature", "threshold", "left", "right",
                                  "prob", "tree_starts", "params")}
            models.append(IlluminationModel(
                forest=Forest.from_arrays(arrays),
                global_feature=GlobalFeature(bins=gf[i], bin_config=bin_config),
                source_id=ids[i],
            ))
    return ModelPool(models)
