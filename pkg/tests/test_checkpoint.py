import json

import numpy as np
import pytest

from tlstm_lab.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from tlstm_lab.rng import substream
from tlstm_lab.trainer import TrainConfig, init_model


def _checkpoint_for(kind, seed=0):
    config = TrainConfig(model=kind, hidden=6, encoder_hidden=5, features=4)
    model = init_model(config, 5, substream(seed, "ckpt", kind))
    dims = {
        "hidden": 6 if model.cell is not None else 0,
        "labels": 5,
        "features": 4,
        "encoder_hidden": 5,
    }
    return Checkpoint(
        model=kind,
        dims=dims,
        delta_max=10.0,
        threshold=0.5,
        config_hash="deadbeef",
        encoder=model.encoder,
        cell=model.cell,
        head_w=model.head_w,
        head_b=model.head_b,
    )


@pytest.mark.parametrize("kind", ["baseline", "lstm", "tlstmv1", "tlstmv2"])
def test_roundtrip_is_bit_exact(tmp_path, kind):
    ckpt = _checkpoint_for(kind)
    path = tmp_path / "c.json"
    save_checkpoint(path, ckpt)
    loaded = load_checkpoint(path)
    assert loaded.model == kind
    assert loaded.dims == ckpt.dims
    assert loaded.delta_max == ckpt.delta_max
    assert loaded.config_hash == "deadbeef"
    for name, arr in ckpt.encoder.blocks().items():
        assert np.array_equal(loaded.encoder.blocks()[name], arr)
    if ckpt.cell is not None:
        assert loaded.cell.kind == ckpt.cell.kind
        for name, arr in ckpt.cell.blocks().items():
            assert np.array_equal(loaded.cell.blocks()[name], arr)
    else:
        assert np.array_equal(loaded.head_w, ckpt.head_w)
        assert np.array_equal(loaded.head_b, ckpt.head_b)


def test_resave_is_byte_identical(tmp_path):
    ckpt = _checkpoint_for("tlstmv1")
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_checkpoint(p1, ckpt)
    save_checkpoint(p2, load_checkpoint(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_unsupported_schema_rejected(tmp_path):
    path = tmp_path / "bad.json"
    save_checkpoint(path, _checkpoint_for("lstm"))
    doc = json.loads(path.read_text())
    doc["schema"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="schema"):
        load_checkpoint(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        load_checkpoint(tmp_path / "nope.json")
