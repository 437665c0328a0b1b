import numpy as np
import pytest

from lrhands.errors import DataError
from lrhands.forest import (Forest, ForestParams, pixel_samples, predict_map,
                            train_forest)

from conftest import uniform_frame


def separable_data(rng, n=500):
    skin = np.array([60.0, 20.0, 20.0]) + rng.normal(0, 1, (n, 3))
    background = np.array([30.0, -20.0, -20.0]) + rng.normal(0, 1, (n, 3))
    x = np.vstack([skin, background])
    y = np.array([1] * n + [0] * n)
    return x, y


def brute_force_best_gini(values, labels):
    """Exhaustive search over midpoints of adjacent distinct sorted values."""
    order = np.argsort(values)
    vs, ys = values[order], labels[order]
    best = None
    for i in range(len(vs) - 1):
        if vs[i] == vs[i + 1]:
            continue
        thr = (vs[i] + vs[i + 1]) / 2.0
        left, right = ys[: i + 1], ys[i + 1:]
        def gini(part):
            p = part.mean()
            return 2 * p * (1 - p) * len(part)
        score = (gini(left) + gini(right)) / len(vs)
        if best is None or score < best[0]:
            best = (score, thr)
    return best


class TestTrainForest:
    def test_separable_training_accuracy(self, rng):
        x, y = separable_data(rng)
        forest = train_forest(x, y, ForestParams(rng_seed=7))
        assert (((forest.predict(x) > 0.5).astype(int)) == y).mean() == 1.0

    def test_seeds_agree_on_separable_data(self, rng):
        x, y = separable_data(rng)
        f1 = train_forest(x, y, ForestParams(rng_seed=1))
        f2 = train_forest(x, y, ForestParams(rng_seed=2))
        assert np.array_equal(f1.predict(x) > 0.5, f2.predict(x) > 0.5)

    def test_deterministic_given_seed(self, rng):
        x, y = separable_data(rng, n=200)
        f1 = train_forest(x, y, ForestParams(rng_seed=3))
        f2 = train_forest(x, y, ForestParams(rng_seed=3))
        assert np.array_equal(f1.threshold, f2.threshold)
        assert np.array_equal(f1.feature, f2.feature)

    def test_depth1_split_matches_exhaustive_oracle(self, rng):
        xs = np.concatenate([rng.normal(0, 0.3, 50), rng.normal(5, 0.3, 50)])
        feats = np.column_stack([xs, np.zeros(100), np.zeros(100)])
        labels = np.array([0] * 50 + [1] * 50)
        params = ForestParams(n_trees=1, max_depth=1, min_leaf_samples=1,
                              bootstrap_fraction=1.0, features_per_split=3)
        forest = train_forest(feats, labels, params)
        _, oracle_thr = brute_force_best_gini(xs, labels)
        assert forest.feature[0] == 0
        assert forest.threshold[0] == pytest.approx(oracle_thr, abs=1e-12)
        assert xs[labels == 0].max() < forest.threshold[0] < xs[labels == 1].min()

    def test_single_class_rejected(self, rng):
        x = rng.normal(0, 1, (50, 3))
        with pytest.raises(DataError, match="degenerate training data"):
            train_forest(x, np.ones(50))

    def test_bad_params_rejected(self):
        with pytest.raises(DataError):
            ForestParams(n_trees=0)
        with pytest.raises(DataError):
            ForestParams(bootstrap_fraction=0.0)

    def test_monotone_duplicated_positives(self, rng):
        x, y = separable_data(rng, n=100)
        params = ForestParams(n_trees=3, bootstrap_fraction=1.0,
                              features_per_split=3, rng_seed=0)
        point = x[0]  # a positive sample
        before = train_forest(x, y, params).predict(point[None, :])[0]
        x2 = np.vstack([x, np.tile(point, (20, 1))])
        y2 = np.concatenate([y, np.ones(20, dtype=int)])
        after = train_forest(x2, y2, params).predict(point[None, :])[0]
        assert after >= before


class TestPredict:
    def test_probability_range_and_granularity(self, rng):
        x, y = separable_data(rng, n=200)
        forest = train_forest(x, y, ForestParams(n_trees=4, rng_seed=5))
        probe = rng.normal(40, 25, (300, 3))
        p = forest.predict(probe)
        assert p.min() >= 0.0 and p.max() <= 1.0
        # leaves on separable clusters are pure, so probabilities are k/n_trees
        assert np.allclose(np.round(p * 4), p * 4, atol=1e-12)

    def test_invariant_to_tree_order(self, rng):
        x, y = separable_data(rng, n=200)
        forest = train_forest(x, y, ForestParams(n_trees=5, rng_seed=6))
        shuffled = Forest(feature=forest.feature, threshold=forest.threshold,
                          left=forest.left, right=forest.right, prob=forest.prob,
                          tree_starts=forest.tree_starts[::-1].copy(),
                          params=forest.params)
        probe = rng.normal(45, 20, (100, 3))
        assert np.allclose(forest.predict(probe), shuffled.predict(probe))

    def test_predict_map_equals_per_pixel_oracle(self, rng):
        x, y = separable_data(rng, n=200)
        forest = train_forest(x, y, ForestParams(n_trees=3, rng_seed=2))
        frame = uniform_frame(6, 4, (0, 0, 0))
        pixels = rng.integers(0, 256, size=(4, 6, 3), dtype=np.uint8)
        frame = type(frame)(pixels=pixels)
        pmap = predict_map(forest, frame)
        from lrhands.imaging import rgb_to_lab
        for r in range(4):
            for c in range(6):
                single = forest.predict(rgb_to_lab(pixels[r, c])[None, :])[0]
                assert pmap[r, c] == pytest.approx(single, abs=1e-12)

    def test_memorized_colors(self, rng):
        skin_rgb = (200, 120, 90)
        bg_rgb = (40, 70, 140)
        from lrhands.imaging import rgb_to_lab
        x = np.vstack([np.tile(rgb_to_lab(skin_rgb), (50, 1)),
                       np.tile(rgb_to_lab(bg_rgb), (50, 1))])
        y = np.array([1] * 50 + [0] * 50)
        forest = train_forest(x, y, ForestParams(n_trees=3, rng_seed=0))
        assert predict_map(forest, uniform_frame(5, 5, skin_rgb)).min() > 0.5
        assert predict_map(forest, uniform_frame(5, 5, bg_rgb)).max() < 0.5


class TestSerialization:
    def test_round_trip(self, rng):
        x, y = separable_data(rng, n=150)
        forest = train_forest(x, y, ForestParams(n_trees=3, rng_seed=9))
        clone = Forest.from_arrays(forest.to_arrays())
        probe = rng.normal(45, 20, (50, 3))
        assert np.array_equal(clone.predict(probe), forest.predict(probe))
        assert clone.params == forest.params


class TestPixelSamples:
    def test_cap_and_labels(self, rng):
        frame = uniform_frame(20, 10, (100, 100, 100))
        mask = np.zeros((10, 20), dtype=bool)
        mask[:, :10] = True
        x, y = pixel_samples(frame, mask, cap_per_class=30, rng=rng)
        assert (y == 1).sum() == 30 and (y == 0).sum() == 30
        assert x.shape == (60, 3)

    def test_dimension_mismatch(self, rng):
        frame = uniform_frame(8, 8, (1, 2, 3))
        with pytest.raises(DataError):
            pixel_samples(frame, np.zeros((4, 4), dtype=bool))
