"""Cross-backend agreement between the numba kernels and numpy fallbacks."""

import numpy as np
import pytest

from defocus import _kernels_np as knp

nb = pytest.importorskip("defocus._kernels_nb")

from conftest import make_texture


@pytest.fixture(scope="module")
def img():
    return make_texture(57, 71, seed=11)


def test_box_sum_bit_identical(img):
    for r in (1, 3, 8, 20):
        assert np.array_equal(knp.box_sum(img, r), nb.box_sum(img, r))


def test_window_sum_bit_identical(img):
    assert np.array_equal(knp.window_sum(img, 8, 7, 8, 7), nb.window_sum(img, 8, 7, 8, 7))


def test_laplacian_bit_identical(img):
    assert np.array_equal(knp.laplacian4(img), nb.laplacian4(img))


def test_convolve_agrees(img):
    taps = np.exp(-np.linspace(-3, 3, 19) ** 2 / 2)
    taps /= taps.sum()
    for fn in ("convolve_axis0", "convolve_axis1"):
        a = getattr(knp, fn)(img, taps)
        b = getattr(nb, fn)(img, taps)
        assert np.abs(a - b).max() < 1e-12


def test_entropy_agrees(img):
    codes = (img * 255.999).astype(np.uint8)
    a = knp.window_entropy(codes, 16)
    b = nb.window_entropy(codes, 16)
    assert np.abs(a - b).max() < 1e-12


def test_numba_thread_count_invariance(img):
    import numba

    taps = np.full(5, 0.2)
    ref = nb.convolve_axis0(img, taps)
    before = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        one = nb.convolve_axis0(img, taps)
    finally:
        numba.set_num_threads(before)
    assert np.array_equal(ref, one)
