"""Checkpoint archives: config JSON plus raw float32 parameter blobs.

An archive is a zip file containing:

    config.json   - kind, model/training configs, tensor name -> shape map,
                    and any JSON-serializable metadata (epoch, RNG states)
    blobs/<name>  - one raw little-endian float32 blob per tensor

Tensor names are the torch ``state_dict`` keys, optionally prefixed with the
network role (``generator.``, ``discriminator.``, ``opt_g.`` ...).  The key
list for each network is documented in docs/checkpoint_format.md.
"""
from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from .errors import ParseError

FORMAT_VERSION = 1
# fixed timestamp keeps archives byte-identical across runs
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def save_archive(path: str | Path, config: dict, tensors: dict[str, torch.Tensor]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dict(config)
    header["format_version"] = FORMAT_VERSION
    header["tensors"] = {name: list(t.shape) for name, t in tensors.items()}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        _write(zf, "config.json", json.dumps(header, indent=2).encode("utf-8"))
        for name, tensor in tensors.items():
            blob = tensor.detach().to(torch.float32).contiguous().numpy()
            _write(zf, f"blobs/{name}", blob.astype("<f4", copy=False).tobytes())


def _write(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, payload)


def load_archive(path: str | Path) -> tuple[dict, dict[str, torch.Tensor]]:
    path = resolve_checkpoint_path(path)
    with zipfile.ZipFile(path) as zf:
        try:
            config = json.loads(zf.read("config.json"))
        except KeyError:
            raise ParseError(f"{path}: missing config.json")
        if config.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"{path}: unsupported format_version {config.get('format_version')}")
        tensors: dict[str, torch.Tensor] = {}
        for name, shape in config["tensors"].items():
            raw = zf.read(f"blobs/{name}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
            tensors[name] = torch.from_numpy(arr)
    return config, tensors


def resolve_checkpoint_path(path: str | Path) -> Path:
    """Accept either the exact archive path or the path without extension."""
    path = Path(path)
    if path.exists():
        return path
    with_ext = path.with_name(path.name + ".ckpt")
    if with_ext.exists():
        return with_ext
    raise FileNotFoundError(f"no checkpoint at {path} or {with_ext}")


def state_dict_blobs(module: torch.nn.Module, prefix: str = "") -> dict[str, torch.Tensor]:
    return {prefix + name: tensor for name, tensor in module.state_dict().items()}


def load_state_dict_blobs(
    module: torch.nn.Module, tensors: dict[str, torch.Tensor], prefix: str = ""
) -> None:
    state = {
        name[len(prefix):]: tensor
        for name, tensor in tensors.items()
        if name.startswith(prefix)
    }
    module.load_state_dict(state)
