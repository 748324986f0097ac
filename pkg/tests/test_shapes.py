"""Synthetic shape dataset: determinism, balance, and value ranges."""

import numpy as np
import pytest

import somcodes as sc
from somcodes import shapes
from somcodes.errors import InvalidArgumentError


def test_shapes_and_dtypes():
    data = sc.make_dataset(40, seed=0)
    assert data.images.shape == (40, 16, 16)
    assert data.images.dtype == np.float64
    assert data.labels.shape == (40,)
    assert data.labels.dtype == np.uint32
    assert data.n_samples == 40
    assert data.size == 16


def test_pixels_stay_in_unit_interval():
    data = sc.make_dataset(64, noise=0.3, seed=1)
    assert data.images.min() >= 0.0
    assert data.images.max() <= 1.0


def test_deterministic():
    a = sc.make_dataset(32, seed=7)
    b = sc.make_dataset(32, seed=7)
    np.testing.assert_array_equal(a.images, b.images)
    np.testing.assert_array_equal(a.labels, b.labels)
    c = sc.make_dataset(32, seed=8)
    assert not np.array_equal(a.images, c.images)


def test_labels_balanced():
    data = sc.make_dataset(100, n_classes=8, seed=2)
    counts = np.bincount(data.labels, minlength=8)
    assert counts.max() - counts.min() <= 1


def test_class_subset():
    data = sc.make_dataset(30, n_classes=3, seed=3)
    assert set(np.unique(data.labels)) <= {0, 1, 2}
    assert data.n_classes == 3


def test_class_name_table_covers_all_classes():
    assert len(shapes.CLASS_NAMES) == 8
    assert len(set(shapes.CLASS_NAMES)) == 8


def test_images_vary_within_class():
    # randomized phase/position: two same-class images should differ
    data = sc.make_dataset(64, n_classes=1, noise=0.0, seed=4)
    assert not np.array_equal(data.images[0], data.images[1])


def test_noise_free_images_are_smooth_in_intensity_budget():
    # contrast/brightness jitter keeps values inside [0, 1] even without noise
    data = sc.make_dataset(64, noise=0.0, seed=5)
    assert data.images.min() >= 0.0
    assert data.images.max() <= 1.0


def test_invalid_args():
    with pytest.raises(InvalidArgumentError):
        sc.make_dataset(0)
    with pytest.raises(InvalidArgumentError):
        sc.make_dataset(10, n_classes=9)
    with pytest.raises(InvalidArgumentError):
        sc.make_dataset(10, size=4)
    with pytest.raises(InvalidArgumentError):
        sc.make_dataset(10, noise=-0.1)
