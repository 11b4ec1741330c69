import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inrpam.core import ConfigError, DimensionError, ImageGrid, PsfKernel
from inrpam.forward import (
    DegradeConfig,
    convolve,
    convolve_backward,
    correlate_array,
    degrade,
    downsample,
    downsample_backward,
    downsampled_shape,
    pad_array,
    unpad_adjoint,
)
from inrpam.psf import gaussian_psf

from conftest import brute_force_correlate, random_image, random_kernel


@pytest.mark.parametrize("boundary", ["reflect", "zero"])
def test_delta_kernel_is_identity(rng, boundary):
    img = random_image(rng, 9, 7)
    for size in (1, 3, 5):
        assert convolve(img, PsfKernel.delta(size), boundary) == img


def test_constant_image_preserved_under_reflect(rng):
    img = ImageGrid(np.full((12, 10), 0.37))
    for size in (3, 7):
        out = convolve(img, random_kernel(rng, size))
        np.testing.assert_allclose(out.data, 0.37, atol=1e-14)


@pytest.mark.parametrize("boundary", ["reflect", "zero"])
@pytest.mark.parametrize("size", [3, 5, 7])
def test_matches_nested_loop_oracle(rng, boundary, size):
    img = random_image(rng, 8, 11)
    kernel = random_kernel(rng, size)
    out = convolve(img, kernel, boundary)
    np.testing.assert_allclose(out.data, brute_force_correlate(img.data, kernel.weights, boundary), atol=1e-12, rtol=0)


def test_separable_kernel_matches_oracle(rng):
    # a Gaussian takes the banded-matrix path
    img = random_image(rng, 13, 9)
    kernel = gaussian_psf(1.3, 7)
    np.testing.assert_allclose(convolve(img, kernel).data, brute_force_correlate(img.data, kernel.weights), atol=1e-12, rtol=0)


def test_correlation_orientation():
    img = np.zeros((5, 5))
    img[2, 2] = 1.0
    w = np.zeros((3, 3))
    w[0, 2] = 1.0  # samples img[y - 1, x + 1]
    out = correlate_array(img, w, "zero")
    assert out[3, 1] == 1.0 and out.sum() == 1.0


def test_kernel_larger_than_image():
    with pytest.raises(DimensionError):
        convolve(ImageGrid(np.zeros((4, 4))), gaussian_psf(1.0, 5))


def test_bad_boundary():
    with pytest.raises(ConfigError):
        convolve(ImageGrid(np.zeros((4, 4))), PsfKernel.delta(3), "wrap")


class TestAdjoints:
    @pytest.mark.parametrize("boundary", ["reflect", "zero"])
    def test_image_adjoint(self, rng, boundary):
        for _ in range(20):
            h, w = rng.integers(5, 16, size=2)
            size = int(rng.choice([1, 3, 5]))
            k = random_kernel(rng, size)
            x = ImageGrid(rng.normal(size=(h, w)))
            y = ImageGrid(rng.normal(size=(h, w)))
            gx, _ = convolve_backward(y, x, k, boundary)
            assert np.vdot(convolve(x, k, boundary).data, y.data) == pytest.approx(np.vdot(x.data, gx.data), abs=1e-10)

    @pytest.mark.parametrize("boundary", ["reflect", "zero"])
    def test_kernel_adjoint(self, rng, boundary):
        # convolution is linear in the kernel: <conv(x, K), y> = <K, grad_kernel>
        for _ in range(20):
            x = rng.normal(size=(10, 9))
            y = ImageGrid(rng.normal(size=(10, 9)))
            k = random_kernel(rng, 5)
            _, gk = convolve_backward(y, ImageGrid(x), k, boundary)
            assert np.vdot(correlate_array(x, k.weights, boundary), y.data) == pytest.approx(np.vdot(k.weights, gk), abs=1e-10)

    def test_kernel_finite_differences(self, rng):
        x = rng.normal(size=(9, 9))
        y = rng.normal(size=(9, 9))
        weights = rng.uniform(size=(3, 3))
        weights /= weights.sum()
        _, gk = convolve_backward(ImageGrid(y), ImageGrid(x), PsfKernel(weights))
        h = 1e-6
        for a in range(3):
            for b in range(3):
                wp, wm = weights.copy(), weights.copy()
                wp[a, b] += h
                wm[a, b] -= h
                fd = (np.vdot(correlate_array(x, wp), y) - np.vdot(correlate_array(x, wm), y)) / (2 * h)
                assert fd == pytest.approx(gk[a, b], rel=1e-5)

    def test_zero_grad(self, rng):
        x = random_image(rng, 6, 6)
        gx, gk = convolve_backward(ImageGrid(np.zeros((6, 6))), x, random_kernel(rng, 3))
        assert not gx.data.any() and not gk.any()

    def test_backward_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            convolve_backward(ImageGrid(np.zeros((5, 5))), random_image(rng, 6, 6), PsfKernel.delta(3))

    @pytest.mark.parametrize("boundary", ["reflect", "zero"])
    def test_pad_adjoint(self, rng, boundary):
        for half in (1, 2, 4):
            x = rng.normal(size=(6, 8))
            y = rng.normal(size=(6 + 2 * half, 8 + 2 * half))
            lhs = np.vdot(pad_array(x, half, boundary), y)
            assert lhs == pytest.approx(np.vdot(x, unpad_adjoint(y, x.shape, half, boundary)), abs=1e-10)

    def test_downsample_adjoint(self, rng):
        for _ in range(20):
            h, w = rng.integers(3, 20, size=2)
            s = int(rng.integers(1, 5))
            x = ImageGrid(rng.normal(size=(h, w)))
            y = ImageGrid(rng.normal(size=downsampled_shape((h, w), s)))
            back = downsample_backward(y, (w, h), s)
            assert np.vdot(downsample(x, s).data, y.data) == pytest.approx(np.vdot(x.data, back.data), abs=1e-10)


def test_downsample_examples():
    img = ImageGrid(np.arange(16.0).reshape(4, 4))
    assert downsample(img, 1) == img
    np.testing.assert_array_equal(downsample(img, 2).data, [[0, 2], [8, 10]])
    assert downsample(ImageGrid(np.zeros((8, 8))), 4).shape == (2, 2)
    assert downsample(ImageGrid(np.zeros((5, 7))), 2).shape == (3, 4)
    with pytest.raises(ConfigError):
        downsample(img, 0)


@given(st.integers(1, 30), st.integers(1, 30), st.integers(1, 6))
@settings(max_examples=50)
def test_scatter_then_decimate_is_identity(h, w, s):
    g = np.arange(float(np.prod(downsampled_shape((h, w), s)))).reshape(downsampled_shape((h, w), s))
    back = downsample_backward(ImageGrid(g), (w, h), s)
    np.testing.assert_array_equal(downsample(back, s).data, g)
    assert back.data.sum() == g.sum()


def test_downsample_backward_shape_check():
    with pytest.raises(DimensionError):
        downsample_backward(ImageGrid(np.zeros((3, 3))), (8, 8), 2)


class TestDegrade:
    def test_identity(self, rng):
        img = random_image(rng, 10, 10)
        assert degrade(img, PsfKernel.delta(1), DegradeConfig()) == img

    def test_seeded(self, rng):
        img = random_image(rng, 16, 16)
        cfg = DegradeConfig(stride=2, noise_sigma=0.05)
        k = gaussian_psf(1.0, 5)
        assert degrade(img, k, cfg, 3) == degrade(img, k, cfg, 3)
        assert degrade(img, k, cfg, 3) != degrade(img, k, cfg, 4)

    def test_composition_order(self, rng):
        img = random_image(rng, 16, 16)
        k = gaussian_psf(1.5, 7)
        out = degrade(img, k, DegradeConfig(stride=2))
        assert out == downsample(convolve(img, k), 2)

    def test_noise_mean(self, rng):
        img = random_image(rng, 128, 128)
        k = gaussian_psf(1.0, 5)
        sigma = 0.1
        clean = degrade(img, k, DegradeConfig(stride=2))
        noisy = degrade(img, k, DegradeConfig(stride=2, noise_sigma=sigma), rng_seed=11)
        n = clean.data.size
        assert abs(noisy.data.mean() - clean.data.mean()) < 3 * sigma / np.sqrt(n)
        assert np.std(noisy.data - clean.data) == pytest.approx(sigma, rel=0.05)

    @pytest.mark.parametrize("kwargs", [{"stride": 0}, {"noise_sigma": -1.0}, {"boundary": "wrap"}])
    def test_config_validation(self, kwargs):
        with pytest.raises(ConfigError):
            DegradeConfig(**kwargs)
