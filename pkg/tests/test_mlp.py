import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from inrpam.core import DimensionError
from inrpam.mlp import HIDDEN, MlpParams, init_mlp, mlp_backward, mlp_backward_batch, mlp_forward, mlp_forward_batch, sigmoid

IN = 6


def random_params(rng, in_dim=IN):
    p = init_mlp(in_dim, rng_seed=int(rng.integers(1 << 30)))
    p.b1[:] = rng.normal(scale=0.1, size=HIDDEN)
    p.b2[:] = rng.normal(scale=0.1, size=HIDDEN)
    p.b3[:] = rng.normal(scale=0.1, size=1)
    return p


def test_zero_params_give_half():
    p = MlpParams.zeros(IN)
    out, _ = mlp_forward(p, np.arange(IN, dtype=float))
    assert out == 0.5


@given(arrays(np.float64, IN, elements=st.floats(-10, 10)))
@settings(max_examples=50)
def test_output_in_open_interval(feature):
    out, _ = mlp_forward(init_mlp(IN, 3), feature)
    assert 0.0 < out < 1.0


def test_sigmoid_stable_and_monotone():
    z = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    s = sigmoid(z)
    assert np.all(np.isfinite(s)) and np.all(np.diff(s) >= 0)
    assert s[2] == 0.5


def test_scaling_last_layer_saturates(rng):
    p = random_params(rng)
    f = rng.normal(size=IN)
    _, cache = mlp_forward(p, f)
    h2 = cache.h2[0]
    p.w3[:, 0] = np.where(h2 > 0, 1.0, 0.0)
    p.b3[:] = 0.0
    if not h2.any():
        pytest.skip("dead hidden layer for this draw")
    outs = []
    for scale in (1, 10, 100, 1000):
        q = p.copy()
        q.w3 *= scale
        outs.append(mlp_forward(q, f)[0])
    assert all(a <= b for a, b in zip(outs, outs[1:]))
    assert outs[-1] == pytest.approx(1.0)


def test_zero_grad_out(rng):
    p = random_params(rng)
    _, cache = mlp_forward(p, rng.normal(size=IN))
    grads, gf = mlp_backward(p, cache, 0.0)
    assert all(not a.any() for a in grads.arrays().values()) and not gf.any()


def test_finite_differences_all_groups(rng):
    p = random_params(rng)
    f = rng.normal(size=IN)
    _, cache = mlp_forward(p, f)
    grads, gf = mlp_backward(p, cache, 1.0)
    h = 1e-6
    for name in MlpParams.NAMES:
        arr = p.arrays()[name]
        g = grads.arrays()[name]
        for idx in list(np.ndindex(arr.shape))[:: max(1, arr.size // 12)]:
            base = arr[idx]
            arr[idx] = base + h
            fp = mlp_forward(p, f)[0]
            arr[idx] = base - h
            fm = mlp_forward(p, f)[0]
            arr[idx] = base
            fd = (fp - fm) / (2 * h)
            assert fd == pytest.approx(g[idx], rel=1e-5, abs=1e-10), (name, idx)
    for i in range(IN):
        e = np.zeros(IN)
        e[i] = h
        fd = (mlp_forward(p, f + e)[0] - mlp_forward(p, f - e)[0]) / (2 * h)
        assert fd == pytest.approx(gf[i], rel=1e-5, abs=1e-10)


def test_batch_equals_sum_of_singles(rng):
    p = random_params(rng)
    feats = rng.normal(size=(5, IN))
    gout = rng.normal(size=5)
    out, cache = mlp_forward_batch(p, feats)
    grads, gfeat = mlp_backward_batch(p, cache, gout)
    for k in range(5):
        single, c = mlp_forward(p, feats[k])
        assert single == pytest.approx(out[k], abs=1e-15)
        _, gf = mlp_backward(p, c, gout[k])
        np.testing.assert_allclose(gf, gfeat[k], atol=1e-14)
    summed = [mlp_backward(p, mlp_forward(p, feats[k])[1], gout[k])[0] for k in range(5)]
    np.testing.assert_allclose(sum(s.w1 for s in summed), grads.w1, atol=1e-13)


def test_init_contract():
    a, b = init_mlp(16, 9), init_mlp(16, 9)
    for name in MlpParams.NAMES:
        np.testing.assert_array_equal(a.arrays()[name], b.arrays()[name])
    assert not a.b1.any() and not a.b2.any() and not a.b3.any()
    assert np.abs(a.w1).max() <= np.sqrt(6 / (16 + HIDDEN))
    assert a.w1.shape == (16, HIDDEN) and a.w3.shape == (HIDDEN, 1)


def test_shape_validation():
    p = MlpParams.zeros(4)
    with pytest.raises(DimensionError):
        MlpParams(p.w1, p.b1, p.w2[:, :3], p.b2, p.w3, p.b3)
    with pytest.raises(DimensionError):
        mlp_forward(p, np.zeros(5))
