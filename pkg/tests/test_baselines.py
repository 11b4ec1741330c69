import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from inrpam.baselines import (
    BlindDeconvConfig,
    baseline_pipeline,
    blind_deconvolve,
    interpolate,
    richardson_lucy,
    upsample_bicubic,
    upsample_bilinear,
)
from inrpam.core import ConfigError, DataError, ImageGrid, PsfKernel
from inrpam.forward import convolve, downsample
from inrpam.metrics import psnr
from inrpam.phantom import VesselPhantomConfig, generate_vessels
from inrpam.psf import gaussian_psf

small_images = arrays(np.float64, st.tuples(st.integers(2, 9), st.integers(2, 9)), elements=st.floats(0, 1))


@pytest.fixture(scope="module")
def phantom64():
    return generate_vessels(VesselPhantomConfig(dims=(64, 64), rng_seed=0))


class TestInterpolation:
    @pytest.mark.parametrize("up", [upsample_bilinear, upsample_bicubic])
    def test_factor_one_identity(self, rng, up):
        img = ImageGrid(rng.uniform(size=(5, 6)))
        assert up(img, 1) == img

    @pytest.mark.parametrize("up", [upsample_bilinear, upsample_bicubic])
    def test_bad_factor(self, up):
        with pytest.raises(ConfigError):
            up(ImageGrid(np.zeros((3, 3))), 0)

    @given(small_images, st.integers(1, 4), st.floats(0, 1))
    @settings(max_examples=40)
    def test_constants_and_samples_reproduced(self, data, factor, c):
        const = ImageGrid(np.full(data.shape, c))
        for up in (upsample_bilinear, upsample_bicubic):
            np.testing.assert_allclose(up(const, factor).data, c, atol=1e-12)
            out = up(ImageGrid(data), factor)
            assert out.shape == (data.shape[0] * factor, data.shape[1] * factor)
            # every sample lands back on the dense pixel decimation took it from
            np.testing.assert_allclose(downsample(out, factor).data, data, atol=1e-12)

    def test_bilinear_two_by_two(self):
        out = upsample_bilinear(ImageGrid(np.array([[0.0, 1.0], [0.0, 1.0]])), 2)
        np.testing.assert_allclose(out.data, [[0, 0.5, 1, 1]] * 4)

    def test_bicubic_reproduces_linear_ramp(self):
        y, x = np.mgrid[0:12, 0:10]
        ramp = ImageGrid(0.05 * x + 0.02 * y)
        out = upsample_bicubic(ramp, 3).data
        yy, xx = np.mgrid[0:36, 0:30] / 3.0
        expected = 0.05 * xx + 0.02 * yy
        # away from the replicated border every tap is a genuine sample
        inner = (slice(3, 30), slice(3, 24))
        np.testing.assert_allclose(out[inner], expected[inner], atol=1e-10)

    def test_methods_differ(self, rng):
        img = ImageGrid(rng.uniform(size=(8, 8)))
        assert upsample_bilinear(img, 2) != upsample_bicubic(img, 2)

    def test_interpolate_clips_and_validates(self):
        spike = np.zeros((6, 6))
        spike[3, 3] = 1.0
        assert upsample_bicubic(ImageGrid(spike), 2).data.min() < 0
        assert interpolate(ImageGrid(spike), 2, "bicubic").data.min() == 0.0
        with pytest.raises(ConfigError):
            interpolate(ImageGrid(spike), 2, "lanczos")


class TestRichardsonLucy:
    def test_delta_kernel_fixed_point(self, phantom64):
        assert richardson_lucy(phantom64, PsfKernel.delta(3), 7) == phantom64

    def test_improves_over_first_iterations(self, phantom64):
        k = gaussian_psf(2.0, 13)
        observed = convolve(phantom64, k)
        scores = [psnr(richardson_lucy(observed, k, i), phantom64) for i in (0, 5, 10, 20)]
        assert all(a < b for a, b in zip(scores, scores[1:]))

    def test_flux_and_nonnegativity(self, phantom64):
        k = gaussian_psf(2.0, 13)
        observed = convolve(phantom64, k)
        for it in (1, 10, 40):
            f = richardson_lucy(observed, k, it)
            assert f.data.min() >= 0
            assert f.data.sum() == pytest.approx(observed.data.sum(), rel=1e-3)

    def test_rejects_negative(self):
        with pytest.raises(DataError):
            richardson_lucy(ImageGrid(-np.ones((8, 8))), PsfKernel.delta(3), 1)
        with pytest.raises(ConfigError):
            richardson_lucy(ImageGrid(np.ones((8, 8))), PsfKernel.delta(3), -1)


class TestBlind:
    def test_sharp_input_near_delta(self, phantom64):
        near_delta = gaussian_psf(0.2, 3)
        restored, _ = blind_deconvolve(phantom64, BlindDeconvConfig(psf_init=near_delta))
        assert psnr(restored, phantom64) > 40

    def test_psf_contract_every_iteration(self, phantom64):
        observed = convolve(phantom64, gaussian_psf(3.0, 19))
        seen = []

        def check(outer, image, psf):
            assert psf.size == 13
            assert abs(psf.weights.sum() - 1) < 1e-12 and psf.weights.min() >= 0
            assert image.min() >= 0
            seen.append(outer)

        blind_deconvolve(observed, BlindDeconvConfig(outer_iterations=6), check)
        assert seen == list(range(6))

    def test_without_psf_updates_reduces_to_rl(self, phantom64):
        k = gaussian_psf(2.0, 13)
        observed = convolve(phantom64, gaussian_psf(2.5, 15))
        cfg = BlindDeconvConfig(outer_iterations=4, inner_rl_steps_image=3, inner_rl_steps_psf=0, psf_init=k)
        restored, psf = blind_deconvolve(observed, cfg)
        assert restored == richardson_lucy(observed, k, 12)
        assert psf == k

    @pytest.mark.xfail(
        strict=True,
        reason="alternating RL drifts toward a spiky, heavy-tailed PSF and loses 2-3 dB here",
    )
    def test_blind_improves_sigma3_blur(self):
        gt = generate_vessels(VesselPhantomConfig(rng_seed=0))
        observed = convolve(gt, gaussian_psf(3.0, 19))
        restored, _ = blind_deconvolve(observed, BlindDeconvConfig(psf_init=gaussian_psf(2.0, 13)))
        assert psnr(restored, gt) >= psnr(observed, gt) + 1.0

    def test_fixed_init_psf_improves_sigma3_blur(self):
        gt = generate_vessels(VesselPhantomConfig(rng_seed=0))
        observed = convolve(gt, gaussian_psf(3.0, 19))
        cfg = BlindDeconvConfig(psf_init=gaussian_psf(2.0, 13), inner_rl_steps_psf=0)
        restored, _ = blind_deconvolve(observed, cfg)
        assert psnr(restored, gt) >= psnr(observed, gt) + 1.0

    @pytest.mark.parametrize(
        "kw", [{"outer_iterations": 0}, {"inner_rl_steps_image": 0}, {"inner_rl_steps_psf": -1}, {"clamp_floor": 0.0}, {"boundary": "wrap"}]
    )
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            BlindDeconvConfig(**kw)


class TestPipeline:
    def test_identity_composition(self, phantom64):
        cfg = BlindDeconvConfig(outer_iterations=3, psf_init=gaussian_psf(0.2, 3))
        out = baseline_pipeline(phantom64, 1, "bilinear", cfg)
        assert psnr(out, phantom64) > 40

    @pytest.mark.parametrize("stride", [2, 4])
    def test_output_dims(self, phantom64, stride):
        sparse = downsample(phantom64, stride)
        out = baseline_pipeline(sparse, stride, "bicubic", BlindDeconvConfig(outer_iterations=1))
        assert out.shape == (sparse.height * stride, sparse.width * stride)
