import math

import numpy as np
import pytest

from tlstm_lab.encoder import (
    EncoderParameters,
    PIXELS,
    encode,
    encode_backward,
    encode_sequence,
    encode_sequence_backward,
    init_encoder_parameters,
)
from tlstm_lab.rng import substream

E1, D = 5, 4


def _zero_params(b1=None, b2=None):
    return EncoderParameters(
        E1,
        D,
        {
            "w1": np.zeros((E1, PIXELS)),
            "b1": np.zeros(E1) if b1 is None else b1,
            "w2": np.zeros((D, E1)),
            "b2": np.zeros(D) if b2 is None else b2,
        },
    )


def _random_params(seed):
    return init_encoder_parameters(E1, D, substream(seed, "enc"))


def test_zero_everything_gives_zero_features():
    img = np.zeros((32, 32))
    assert np.array_equal(encode(_zero_params(), img), np.zeros(D))


def test_zero_weights_pass_output_bias_through():
    b2 = np.array([0.1, -0.2, 0.3, 0.4])
    p = _zero_params(b1=np.ones(E1), b2=b2)
    assert np.array_equal(encode(p, np.zeros((32, 32))), b2)


def test_encode_is_pure():
    p = _random_params(0)
    img = substream(1, "img").uniform(0, 1, (32, 32))
    assert np.array_equal(encode(p, img), encode(p, img))


@pytest.mark.parametrize("seed", [2, 3])
def test_encode_matches_straight_line_oracle(seed):
    p = _random_params(seed)
    img = substream(seed, "img").uniform(0, 1, (32, 32))
    flat = img.reshape(-1) - 0.5  # pixels are centered on the grey background
    hidden = [
        math.tanh(sum(p.w1[r][j] * flat[j] for j in range(PIXELS)) + p.b1[r])
        for r in range(E1)
    ]
    expected = [
        sum(p.w2[k][r] * hidden[r] for r in range(E1)) + p.b2[k] for k in range(D)
    ]
    assert np.max(np.abs(encode(p, img) - np.array(expected))) < 1e-12


def test_zero_upstream_gradient_gives_zero_gradients():
    p = _random_params(4)
    img = substream(4, "img").uniform(0, 1, (32, 32))
    grads = encode_backward(p, img, np.zeros(D))
    for name in grads.keys():
        assert not grads[name].any()


def test_output_bias_gradient_equals_upstream():
    p = _random_params(5)
    img = substream(5, "img").uniform(0, 1, (32, 32))
    up = np.array([0.3, -1.0, 2.0, 0.25])
    grads = encode_backward(p, img, up)
    assert np.array_equal(grads["b2"], up)


def test_gradients_match_finite_differences():
    p = _random_params(6)
    rng = substream(6, "img")
    images = rng.uniform(0, 1, (3, 32, 32))
    target = rng.normal(size=(3, D))

    def loss():
        feats, _ = encode_sequence(p, images)
        return 0.5 * float(((feats - target) ** 2).sum())

    feats, cache = encode_sequence(p, images)
    analytic = encode_sequence_backward(p, cache, feats - target)

    step = 1e-5
    for name, arr in p.blocks().items():
        flat = arr.reshape(-1)
        fd = np.zeros(flat.size)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = loss()
            flat[j] = orig - step
            down = loss()
            flat[j] = orig
            fd[j] = (up - down) / (2 * step)
        a = analytic[name].reshape(-1)
        rel = np.abs(a - fd) / np.maximum(np.abs(a) + np.abs(fd), 1e-6)
        assert rel.max() < 1e-4, (name, rel.max())


def test_uint8_images_dequantize():
    p = _random_params(7)
    img = substream(7, "img").uniform(0, 1, (32, 32))
    q = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)
    a = encode(p, q)
    b = encode(p, q.astype(np.float64) / 255.0)
    assert np.array_equal(a, b)


def test_dimension_mismatch_raises():
    p = _random_params(8)
    with pytest.raises(ValueError, match="expected"):
        encode(p, np.zeros((16, 16)))
    feats, cache = encode_sequence(p, np.zeros((2, 32, 32)))
    with pytest.raises(ValueError, match="gradient shape"):
        encode_sequence_backward(p, cache, np.zeros((3, D)))
    with pytest.raises(ValueError, match="non-finite"):
        encode(p, np.full((32, 32), np.inf))
