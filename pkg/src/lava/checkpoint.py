"""Binary checkpoints: magic, version, JSON header, raw float64 payload.

Layout::

    b"LAVA" | u32 version | u64 header_len | header (UTF-8 JSON) | payload

The header carries the model kind, its config, the vocabulary and one
``{name, shape, offset}`` entry per tensor. Offsets count float64 elements
into the little-endian, row-major payload.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .data import Vocabulary
from .nat import NATModel
from .teacher import TeacherModel

MAGIC = b"LAVA"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")
MODEL_KINDS = {"nat": NATModel, "teacher": TeacherModel}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: NATModel | TeacherModel
    kind: str
    vocab: Vocabulary | None
    extra: dict


def _kind_of(model) -> str:
    for kind, cls in MODEL_KINDS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def save_checkpoint(model, path: str | Path, vocab: Vocabulary | None = None,
                    extra: dict | None = None) -> None:
    """Write ``model`` to ``path`` (atomically, through a temporary sibling file)."""
    state = model.state_dict()
    index, offset = [], 0
    for name, arr in state.items():
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
    header = {
        "kind": _kind_of(model),
        "config": model.cfg.to_dict(),
        "vocab": vocab.regular_tokens if vocab is not None else None,
        "tensors": index,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, VERSION, len(blob)))
        f.write(blob)
        for arr in state.values():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    os.replace(tmp, path)


def _read_header(raw: bytes) -> tuple[dict, int]:
    if len(raw) < _PREFIX.size:
        raise CheckpointError("truncated checkpoint: missing prefix")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    start = _PREFIX.size + hlen
    if len(raw) < start:
        raise CheckpointError("truncated checkpoint: header cut short")
    try:
        header = json.loads(raw[_PREFIX.size:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}") from None
    return header, start


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Rebuild the model stored at ``path``; nothing is returned on any error."""
    raw = Path(path).read_bytes()
    header, start = _read_header(raw)
    kind = header.get("kind")
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    total = sum(int(np.prod(t["shape"], dtype=np.int64)) for t in header["tensors"])
    payload = raw[start:]
    if len(payload) != 8 * total:
        raise CheckpointError(f"truncated checkpoint: payload has {len(payload)} bytes, "
                              f"expected {8 * total}")
    flat = np.frombuffer(payload, dtype="<f8")
    state = {}
    for t in header["tensors"]:
        n = int(np.prod(t["shape"], dtype=np.int64))
        state[t["name"]] = flat[t["offset"]:t["offset"] + n].reshape(t["shape"]).astype(np.float64)
    model = MODEL_KINDS[kind](ModelConfig.from_dict(header["config"]))
    for name in dict(model.named_parameters()):
        if name not in state:
            raise CheckpointError(f"checkpoint is missing tensor '{name}'")
    model.load_state_dict(state, strict=True)
    model.eval()
    vocab = Vocabulary(header["vocab"]) if header.get("vocab") is not None else None
    return Checkpoint(model, kind, vocab, header.get("extra", {}))


def list_tensors(path: str | Path) -> list[tuple[str, tuple[int, ...]]]:
    header, _ = _read_header(Path(path).read_bytes())
    return [(t["name"], tuple(t["shape"])) for t in header["tensors"]]
