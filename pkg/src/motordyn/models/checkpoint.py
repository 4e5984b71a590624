"""Binary checkpoints: ``MDYN`` magic, u32 version, u32 header length, JSON header, f64 blocks.

The header is canonical JSON (sorted keys, no whitespace) holding the model
config, seed, free-form training metadata and a parameter manifest of
names, shapes and byte offsets into the data section.  Keys listed in
``VOLATILE_KEYS`` (wall-clock figures) are the only fields allowed to differ
between otherwise identical saves.
"""

import json
import struct

import numpy as np

from ..errors import CheckpointError, ShapeError
from .builder import build_model
from .config import ModelConfig

MAGIC = b"MDYN"
FORMAT_VERSION = 1
VOLATILE_KEYS = ("saved_at", "wall_clock_s")


def _header(model, metadata):
    manifest, offset = [], 0
    for name, p, _ in model.named_parameters():
        nbytes = p.size * 8
        manifest.append({"name": name, "shape": list(p.shape), "offset": offset, "nbytes": nbytes})
        offset += nbytes
    return {
        "config": model.config.to_dict(),
        "seed": model.config.seed,
        "metadata": metadata or {},
        "parameters": manifest,
        "data_bytes": offset,
    }


def checkpoint_bytes(model, metadata=None) -> bytes:
    header = json.dumps(_header(model, metadata), sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<I", len(header)), header]
    for _, p, _ in model.named_parameters():
        parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(model, path, metadata=None):
    data = checkpoint_bytes(model, metadata)
    with open(path, "wb") as fh:
        fh.write(data)
    return path


def parse_checkpoint(data: bytes):
    """Split raw bytes into (header dict, data section) after validating framing."""
    if len(data) < 12 or data[:4] != MAGIC:
        raise CheckpointError("not a motordyn checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if 12 + hlen > len(data):
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[12:12 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    body = data[12 + hlen:]
    if len(body) != header.get("data_bytes", -1):
        raise CheckpointError("checkpoint data section has the wrong size")
    return header, body


def load_checkpoint(path):
    """Rebuild the model from the header and fill in the stored parameters.

    Returns ``(model, header)``.  Raises :class:`CheckpointError` when the
    manifest does not describe the rebuilt graph.
    """
    with open(path, "rb") as fh:
        header, body = parse_checkpoint(fh.read())
    try:
        config = ModelConfig.from_dict(header["config"])
    except (TypeError, ValueError, KeyError) as exc:
        raise CheckpointError(f"invalid model config in checkpoint: {exc}") from None
    model = build_model(config)
    graph = [(name, p.shape) for name, p, _ in model.named_parameters()]
    stored = [(e["name"], tuple(e["shape"])) for e in header["parameters"]]
    if graph != stored:
        raise CheckpointError("parameter manifest does not match the rebuilt model graph")
    state = {}
    for entry in header["parameters"]:
        raw = body[entry["offset"]:entry["offset"] + entry["nbytes"]]
        state[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"])
    try:
        model.load_state_dict(state)
    except ShapeError as exc:
        raise CheckpointError(str(exc)) from None
    return model, header
