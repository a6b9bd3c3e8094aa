"""Trainable image encoder: flatten -> affine -> tanh -> affine.

Maps a 32x32 grayscale image to the feature vector the recurrent cells
consume.  Deliberately small and dense so its gradients stay hand-derivable;
it is trained jointly with the cell.

Pixels are centered on the fixed 0.5 grey background before the first layer.
This is absorbable into the first-layer bias (same function class), but
removing the common-mode background makes the optimization far better
conditioned.
"""

import numpy as np

from .cells import GradientSet
from .simulator import IMAGE_SIZE

__all__ = [
    "EncoderParameters",
    "init_encoder_parameters",
    "encode",
    "encode_backward",
    "encode_sequence",
    "encode_sequence_backward",
]

PIXELS = IMAGE_SIZE * IMAGE_SIZE

ENCODER_BLOCK_NAMES = ("w1", "b1", "w2", "b2")


class EncoderParameters:
    """Weights of the two affine layers; hidden width E1, output width D."""

    def __init__(self, hidden, out, blocks):
        self.hidden = hidden
        self.out = out
        shapes = {
            "w1": (hidden, PIXELS),
            "b1": (hidden,),
            "w2": (out, hidden),
            "b2": (out,),
        }
        if set(blocks) != set(ENCODER_BLOCK_NAMES):
            raise ValueError(f"encoder expects blocks {ENCODER_BLOCK_NAMES}")
        self._blocks = {}
        for name in ENCODER_BLOCK_NAMES:
            arr = np.ascontiguousarray(blocks[name], dtype=np.float64)
            if arr.shape != shapes[name]:
                raise ValueError(f"block {name} has shape {arr.shape}, expected {shapes[name]}")
            self._blocks[name] = arr
            setattr(self, name, arr)

    def block_names(self):
        return list(ENCODER_BLOCK_NAMES)

    def blocks(self):
        return dict(self._blocks)

    def copy(self):
        return EncoderParameters(
            self.hidden, self.out, {k: v.copy() for k, v in self._blocks.items()}
        )

    def mark_updated(self):
        pass  # no derived caches


def init_encoder_parameters(hidden, out, rng):
    blocks = {
        "w1": rng.uniform(-1, 1, (hidden, PIXELS)) / np.sqrt(PIXELS),
        "b1": np.zeros(hidden),
        "w2": rng.uniform(-1, 1, (out, hidden)) / np.sqrt(hidden),
        "b2": np.zeros(out),
    }
    return EncoderParameters(hidden, out, blocks)


def _as_pixel_rows(images):
    arr = np.asarray(images)
    if arr.dtype == np.uint8:  # quantized dataset pixels
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64, copy=False)
        if not np.isfinite(arr).all():
            raise ValueError("non-finite pixels")
    if arr.ndim == 2 and arr.shape == (IMAGE_SIZE, IMAGE_SIZE):
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE):
        raise ValueError(
            f"expected (T, {IMAGE_SIZE}, {IMAGE_SIZE}) images, got shape {arr.shape}"
        )
    return arr.reshape(arr.shape[0], PIXELS) - 0.5


def encode_sequence(params, images):
    """Encode a stack of images at once.

    Returns (features (T, D), cache) where the cache holds what the backward
    pass needs.
    """
    px = _as_pixel_rows(images)
    hidden = np.tanh(px @ params.w1.T + params.b1)
    feats = hidden @ params.w2.T + params.b2
    return feats, (px, hidden)


def encode_sequence_backward(params, cache, d_features):
    """Gradients for a batched encode; ``d_features`` is (T, D)."""
    px, hidden = cache
    d_features = np.asarray(d_features, dtype=np.float64)
    if d_features.shape != (px.shape[0], params.out):
        raise ValueError(
            f"feature gradient shape {d_features.shape} != ({px.shape[0]}, {params.out})"
        )
    g_w2 = d_features.T @ hidden
    g_b2 = d_features.sum(axis=0)
    d_hidden = (d_features @ params.w2) * (1.0 - hidden * hidden)
    g_w1 = d_hidden.T @ px
    g_b1 = d_hidden.sum(axis=0)
    return GradientSet({"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2})


def encode(params, image):
    """Feature vector for a single image."""
    feats, _ = encode_sequence(params, image)
    return feats[0]


def encode_backward(params, image, d_features):
    """Gradients for a single image (recomputes the forward cache)."""
    _, cache = encode_sequence(params, image)
    return encode_sequence_backward(params, cache, np.asarray(d_features)[None])
