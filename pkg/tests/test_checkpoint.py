import json
import zipfile

import pytest
import torch

from latent_translation.checkpoint import (
    FORMAT_VERSION,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from latent_translation.config import TrainConfig
from latent_translation.errors import (
    CheckpointShapeError,
    CheckpointVersionError,
    CorruptCheckpointError,
)
from latent_translation.nets import build_model, default_archs, encode

ARCHS = default_archs(base_channels=4, latent_channels=4)


def _checkpoint() -> Checkpoint:
    return Checkpoint(
        models={
            "encoder": build_model(ARCHS["encoder"], 1),
            "decoder": build_model(ARCHS["decoder"], 2),
        },
        config=TrainConfig(seed=7),
        epoch=3,
        rng_state=torch.Generator().manual_seed(5).get_state().numpy().tobytes(),
        stage="vaegan_domain1",
    )


def test_roundtrip_bit_identical_forward(tmp_path):
    ckpt = _checkpoint()
    path = tmp_path / "c.ckpt"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    x = torch.rand(2, 3, 16, 16, generator=torch.Generator().manual_seed(3)) * 2 - 1
    assert torch.equal(encode(ckpt.models["encoder"], x), encode(loaded.models["encoder"], x))
    assert loaded.epoch == 3 and loaded.stage == "vaegan_domain1"
    assert loaded.rng_state == ckpt.rng_state
    assert loaded.config == ckpt.config
    for name in ckpt.models:
        assert loaded.models[name].checksum() == ckpt.models[name].checksum()


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError, match="checkpoint not found"):
        load_checkpoint(tmp_path / "nope.ckpt")


def test_truncated_file_is_corrupt(tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(_checkpoint(), path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 3])
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_not_a_zip_is_corrupt(tmp_path):
    path = tmp_path / "c.ckpt"
    path.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_version_mismatch(tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(_checkpoint(), path)
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        blobs = {n: zf.read(n) for n in zf.namelist() if n != "manifest.json"}
    manifest["format_version"] = FORMAT_VERSION + 1
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("manifest.json", json.dumps(manifest))
        for name, raw in blobs.items():
            zf.writestr(name, raw)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_shape_mismatch_names_tensor(tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(_checkpoint(), path)
    victim = "tensors/encoder/head.weight.bin"
    with zipfile.ZipFile(path) as zf:
        blobs = {n: zf.read(n) for n in zf.namelist()}
    # swap in a blob with the wrong shape
    other = blobs["tensors/encoder/head.bias.bin"]
    blobs[victim] = other
    with zipfile.ZipFile(path, "w") as zf:
        for name, raw in blobs.items():
            zf.writestr(name, raw)
    with pytest.raises(CheckpointShapeError, match="head.weight"):
        load_checkpoint(path)


def test_missing_tensor_blob_is_corrupt(tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(_checkpoint(), path)
    with zipfile.ZipFile(path) as zf:
        blobs = {n: zf.read(n) for n in zf.namelist()}
    blobs.pop("tensors/decoder/net.0.weight.bin")
    with zipfile.ZipFile(path, "w") as zf:
        for name, raw in blobs.items():
            zf.writestr(name, raw)
    with pytest.raises(CorruptCheckpointError, match="net.0.weight"):
        load_checkpoint(path)
