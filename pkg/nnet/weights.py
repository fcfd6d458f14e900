"""Weight files: one JSON header line, then the parameters as a flat
little-endian float32 blob in ``model.parameters()`` order.
"""

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from nnet.autoencoder import CAEModel
from utils.errors import ShapeMismatch, WeightsArchitectureError, WeightsChecksumError

FORMAT = "cae-weights/1"


def save_weights(model, path):
    path = Path(path)
    arrays = [np.ascontiguousarray(p, dtype="<f4") for _, p, _ in model.parameters()]
    blob = b"".join(a.tobytes() for a in arrays)
    header = {
        "format": FORMAT,
        "latent_dim": model.latent_dim,
        "window": model.window,
        "dtype": "float32",
        "architecture": model.architecture(),
        "params": [{"key": key, "shape": list(p.shape)} for key, p, _ in model.parameters()],
        "byte_length": len(blob),
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + blob)
    logging.info("Saved weights to %s (%d bytes).", path, len(blob))
    return path


def load_weights(path):
    path = Path(path)
    data = path.read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise WeightsChecksumError(f"{path}: no header terminator")
    try:
        header = json.loads(data[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightsArchitectureError(f"{path}: unreadable header ({exc})") from None
    if header.get("format") != FORMAT:
        raise WeightsArchitectureError(f"{path}: unknown format {header.get('format')!r}")

    blob = data[newline + 1:]
    if len(blob) != header["byte_length"] or hashlib.sha256(blob).hexdigest() != header["sha256"]:
        raise WeightsChecksumError(f"{path}: parameter blob does not match its checksum")

    try:
        model = CAEModel.from_architecture(header["latent_dim"], header["window"], header["architecture"])
    except (ShapeMismatch, ValueError, KeyError, TypeError) as exc:
        raise WeightsArchitectureError(f"{path}: {exc}") from None

    expected = [(key, list(p.shape)) for key, p, _ in model.parameters()]
    declared = [(entry["key"], entry["shape"]) for entry in header["params"]]
    if expected != declared:
        raise WeightsArchitectureError(
            f"{path}: parameter shapes do not fit a latent-{header['latent_dim']} model"
        )

    values = np.frombuffer(blob, dtype="<f4")
    offset = 0
    for layer in model.layers:
        for name in sorted(layer.params):
            size = layer.params[name].size
            chunk = values[offset:offset + size].reshape(layer.params[name].shape)
            layer.params[name] = chunk.astype(np.float32)
            offset += size
    logging.info("Loaded latent-%d weights from %s.", model.latent_dim, path)
    return model
