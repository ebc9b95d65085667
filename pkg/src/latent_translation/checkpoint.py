"""Checkpoint container: one zip with a JSON manifest and raw tensor blobs.

Layout:
    manifest.json                  stage, epoch, config, architecture
                                   descriptors, rng state, format version
    tensors/<model>/<param>.bin    4-byte magic, dtype code (f32), ndim,
                                   u32 dims, then little-endian raw data

Round-trips are bit-exact; loading validates every tensor shape against
the module rebuilt from its embedded descriptor.
"""

from __future__ import annotations

import dataclasses
import json
import struct
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig
from .errors import CheckpointShapeError, CheckpointVersionError, CorruptCheckpointError
from .nets import Arch, ModelParams, build_model

FORMAT_VERSION = 1
_MAGIC = b"TNSR"
_DTYPE_F32 = 0

STAGES = ("vaegan_domain1", "vaegan_domain2", "translator", "image_translator")


@dataclass
class Checkpoint:
    """Training state: named models, config, epoch, and generator state."""

    models: dict[str, ModelParams]
    config: TrainConfig
    epoch: int
    rng_state: bytes
    stage: str


def _encode_tensor(t: torch.Tensor) -> bytes:
    arr = t.detach().cpu().to(torch.float32).contiguous().numpy()
    header = _MAGIC + struct.pack("<BB", _DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    if arr.dtype.byteorder == ">":
        arr = arr.astype("<f4")
    return header + arr.tobytes()


def _decode_tensor(raw: bytes, name: str) -> torch.Tensor:
    if len(raw) < 6 or raw[:4] != _MAGIC:
        raise CorruptCheckpointError(f"corrupt checkpoint: bad tensor header for '{name}'")
    dtype_code, ndim = struct.unpack("<BB", raw[4:6])
    if dtype_code != _DTYPE_F32:
        raise CorruptCheckpointError(f"corrupt checkpoint: unknown dtype for '{name}'")
    shape_end = 6 + 4 * ndim
    shape = struct.unpack(f"<{ndim}I", raw[6:shape_end])
    expected = int(np.prod(shape)) if ndim else 1
    body = raw[shape_end:]
    if len(body) != expected * 4:
        raise CorruptCheckpointError(f"corrupt checkpoint: truncated tensor '{name}'")
    arr = np.frombuffer(body, dtype="<f4").reshape(shape).copy()
    return torch.from_numpy(arr)


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "stage": ckpt.stage,
        "epoch": ckpt.epoch,
        "config": dataclasses.asdict(ckpt.config),
        "rng_state_hex": ckpt.rng_state.hex(),
        "models": {
            name: {"arch": mp.arch.to_dict(), "init_seed": mp.init_seed}
            for name, mp in ckpt.models.items()
        },
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        for name, mp in ckpt.models.items():
            for pname, tensor in mp.tensors.items():
                zf.writestr(f"tensors/{name}/{pname}.bin", _encode_tensor(tensor))


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as e:
        raise CorruptCheckpointError(f"corrupt checkpoint: {path} is not a valid container") from e
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError as e:
            raise CorruptCheckpointError(f"corrupt checkpoint: {path} has no manifest") from e
        except json.JSONDecodeError as e:
            raise CorruptCheckpointError(f"corrupt checkpoint: unreadable manifest in {path}") from e

        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise CheckpointVersionError(
                f"checkpoint format version {version} unsupported (expected {FORMAT_VERSION})"
            )
        try:
            config = TrainConfig(**manifest["config"])
            stage = manifest["stage"]
            epoch = manifest["epoch"]
            rng_state = bytes.fromhex(manifest["rng_state_hex"])
            model_entries = manifest["models"]
        except (KeyError, TypeError, ValueError) as e:
            raise CorruptCheckpointError(f"corrupt checkpoint: malformed manifest in {path}") from e

        models: dict[str, ModelParams] = {}
        for name, entry in model_entries.items():
            mp = build_model(Arch.from_dict(entry["arch"]), entry["init_seed"])
            state = {}
            for pname, ref in mp.module.state_dict().items():
                blob_name = f"tensors/{name}/{pname}.bin"
                try:
                    raw = zf.read(blob_name)
                except KeyError as e:
                    raise CorruptCheckpointError(
                        f"corrupt checkpoint: missing tensor blob '{blob_name}'"
                    ) from e
                tensor = _decode_tensor(raw, blob_name)
                if tuple(tensor.shape) != tuple(ref.shape):
                    raise CheckpointShapeError(
                        f"shape mismatch for tensor '{name}.{pname}': stored "
                        f"{tuple(tensor.shape)}, descriptor expects {tuple(ref.shape)}"
                    )
                state[pname] = tensor
            mp.module.load_state_dict(state)
            models[name] = mp
    return Checkpoint(models=models, config=config, epoch=epoch, rng_state=rng_state, stage=stage)
