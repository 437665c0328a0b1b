import numpy as np
import pytest

from lrhands.imaging import Frame


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def uniform_frame(width, height, color, index=0):
    pixels = np.empty((height, width, 3), dtype=np.uint8)
    pixels[:] = color
    return Frame(pixels=pixels, index=index)


def random_frame(rng, width=24, height=18, index=0):
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return Frame(pixels=pixels, index=index)


def random_blob_mask(rng, shape=(40, 50), n_blobs=3, radius=(3, 8)):
    """A few filled discs on an empty mask."""
    mask = np.zeros(shape, dtype=bool)
    ys, xs = np.mgrid[: shape[0], : shape[1]]
    for _ in range(n_blobs):
        cy = rng.integers(0, shape[0])
        cx = rng.integers(0, shape[1])
        r = rng.integers(radius[0], radius[1] + 1)
        mask |= (ys - cy) ** 2 + (xs - cx) ** 2 <= r * r
    return mask
