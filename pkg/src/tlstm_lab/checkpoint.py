"""Versioned JSON checkpoint container for encoder + cell (or baseline head).

Arrays are stored as base64 of their raw little-endian float64 bytes in
C (row-major) order, so a save/load round trip is bit-exact and two runs
that produce identical parameters produce byte-identical files.
Block order inside the container follows the canonical block_names() order
of each parameter object.
"""

import base64
import json
from dataclasses import dataclass

import numpy as np

from .cells import CellKind, CellParameters
from .encoder import EncoderParameters

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint"]

CHECKPOINT_SCHEMA = 1


def _encode_array(arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(arr.tobytes(order="C")).decode("ascii")}


def _decode_array(obj):
    raw = base64.b64decode(obj["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(obj["shape"])


@dataclass
class Checkpoint:
    model: str  # baseline | lstm | tlstmv1 | tlstmv2
    dims: dict
    delta_max: float
    threshold: float
    config_hash: str
    encoder: EncoderParameters | None  # None when datasets ship features
    cell: CellParameters | None
    head_w: np.ndarray | None
    head_b: np.ndarray | None


def save_checkpoint(path, ckpt):
    doc = {
        "schema": CHECKPOINT_SCHEMA,
        "model": ckpt.model,
        "dims": ckpt.dims,
        "delta_max": ckpt.delta_max,
        "threshold": ckpt.threshold,
        "config_hash": ckpt.config_hash,
        "encoder": (
            None
            if ckpt.encoder is None
            else {name: _encode_array(arr) for name, arr in ckpt.encoder.blocks().items()}
        ),
        "cell": (
            None
            if ckpt.cell is None
            else {name: _encode_array(arr) for name, arr in ckpt.cell.blocks().items()}
        ),
        "head": (
            None
            if ckpt.head_w is None
            else {"w": _encode_array(ckpt.head_w), "b": _encode_array(ckpt.head_b)}
        ),
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text + "\n")
    except OSError as exc:
        raise OSError(f"failed writing checkpoint to {path}: {exc}") from exc


def load_checkpoint(path):
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise OSError(f"failed reading checkpoint from {path}: {exc}") from exc
    if doc.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"{path}: unsupported checkpoint schema {doc.get('schema')!r}")
    dims = doc["dims"]
    encoder = None
    if doc["encoder"] is not None:
        encoder = EncoderParameters(
            dims["encoder_hidden"],
            dims["features"],
            {name: _decode_array(obj) for name, obj in doc["encoder"].items()},
        )
    cell = None
    if doc["cell"] is not None:
        cell = CellParameters(
            CellKind(doc["model"]),
            dims["hidden"],
            dims["labels"],
            dims["features"],
            {name: _decode_array(obj) for name, obj in doc["cell"].items()},
        )
    head_w = head_b = None
    if doc["head"] is not None:
        head_w = _decode_array(doc["head"]["w"])
        head_b = _decode_array(doc["head"]["b"])
    return Checkpoint(
        model=doc["model"],
        dims=dims,
        delta_max=float(doc["delta_max"]),
        threshold=float(doc["threshold"]),
        config_hash=doc["config_hash"],
        encoder=encoder,
        cell=cell,
        head_w=head_w,
        head_b=head_b,
    )
