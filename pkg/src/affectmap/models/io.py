"""Binary model serialization.

Layout: 8-byte magic "AFMAP001", little-endian uint32 header length, a
UTF-8 JSON header (kind, formats, scalar metadata, array manifest), then
the arrays as raw little-endian float64 bytes, row-major, in manifest
order. Save -> load -> predict round-trips bit-identically because the
parameters themselves round-trip bit-identically.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from ..errors import ContractError, ParseError
from ..lexicon import EmotionFormat
from .boosting import BoostedEnsemble
from .ffnn import FfnnConfig, FfnnModel
from .knn import KnnModel
from .linear import LinearModel

__all__ = ["MAGIC", "save_model", "load_model"]

MAGIC = b"AFMAP001"


def _format_dict(fmt):
    if fmt is None:
        return None
    return {
        "name": fmt.name,
        "variables": list(fmt.variables),
        "scale_low": fmt.scale_low,
        "scale_high": fmt.scale_high,
    }


def _format_from(d):
    if d is None:
        return None
    return EmotionFormat(d["name"], tuple(d["variables"]), d["scale_low"], d["scale_high"])


def _config_from(d):
    d = dict(d)
    d["hidden_sizes"] = tuple(d["hidden_sizes"])
    return FfnnConfig(**d)


def _net_arrays(prefix, net):
    arrays = []
    for i, w in enumerate(net.weights):
        arrays.append((f"{prefix}W{i}", w))
    for i, b in enumerate(net.biases):
        arrays.append((f"{prefix}b{i}", b))
    return arrays


def _collect(model):
    """(kind, meta, named arrays) for any supported model."""
    if isinstance(model, LinearModel):
        if model.W is None:
            raise ContractError("cannot save an unfitted model")
        return "linear", {}, [("W", model.W), ("b", model.b)]
    if isinstance(model, KnnModel):
        if model.source is None:
            raise ContractError("cannot save an unfitted model")
        meta = {"k": model.k}
        return "knn", meta, [("source", model.source), ("target", model.target)]
    if isinstance(model, FfnnModel):
        if not model.fitted:
            raise ContractError("cannot save an unfitted model")
        meta = {"config": asdict(model.config)}
        arrays = _net_arrays("", model)
        arrays.append(("loss_trace", np.asarray(model.loss_trace, dtype=np.float64)))
        return "ffnn", meta, arrays
    if isinstance(model, BoostedEnsemble):
        if not model.fitted:
            raise ContractError("cannot save an unfitted model")
        meta = {
            "max_stages": model.max_stages,
            "seed": model.seed,
            "base_config": asdict(model.base_config),
            "variables": list(model.variables) if model.variables else None,
            "n_features": model.n_features,
            "stage_counts": [len(nets) for nets in model.stages],
            "stage_seeds": [[net.config.seed for net in nets] for nets in model.stages],
        }
        arrays = []
        for vi, (nets, weights) in enumerate(zip(model.stages, model.stage_weights)):
            arrays.append((f"v{vi}_weights", weights))
            for si, net in enumerate(nets):
                arrays.extend(_net_arrays(f"v{vi}s{si}_", net))
        return "boosted", meta, arrays
    raise ContractError(f"cannot serialize {type(model).__name__}")


def save_model(model, dest) -> None:
    kind, meta, arrays = _collect(model)
    header = {
        "kind": kind,
        "source_format": _format_dict(getattr(model, "source_format", None)),
        "target_format": _format_dict(getattr(model, "target_format", None)),
        "meta": meta,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", len(blob))
    out += blob
    for _, a in arrays:
        out += np.ascontiguousarray(a, dtype="<f8").tobytes()
    if hasattr(dest, "write"):
        dest.write(bytes(out))
    else:
        Path(dest).write_bytes(bytes(out))


def _read_all(source) -> bytes:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_bytes()


def load_model(source):
    raw = _read_all(source)
    if len(raw) < 12 or raw[:8] != MAGIC:
        raise ParseError("not a model file (bad magic)")
    (header_len,) = struct.unpack("<I", raw[8:12])
    if len(raw) < 12 + header_len:
        raise ParseError("truncated model header")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"corrupt model header: {e}") from None
    offset = 12 + header_len
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise ParseError(f"truncated payload for array {entry['name']!r}")
        arrays[entry["name"]] = (
            np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
            .reshape(shape)
            .astype(np.float64)
        )
        offset += nbytes
    source_format = _format_from(header["source_format"])
    target_format = _format_from(header["target_format"])
    kind = header["kind"]
    meta = header["meta"]
    if kind == "linear":
        model = LinearModel()
        model.W = arrays["W"]
        model.b = arrays["b"]
        model.source_format = source_format
        model.target_format = target_format
        return model
    if kind == "knn":
        model = KnnModel(k=meta["k"])
        model.source = np.ascontiguousarray(arrays["source"])
        model.target = np.ascontiguousarray(arrays["target"])
        model.source_format = source_format
        model.target_format = target_format
        return model
    if kind == "ffnn":
        cfg = _config_from(meta["config"])
        n_layers = len(cfg.hidden_sizes) + 1
        weights = [arrays[f"W{i}"] for i in range(n_layers)]
        biases = [arrays[f"b{i}"] for i in range(n_layers)]
        return FfnnModel(
            cfg,
            weights=weights,
            biases=biases,
            source_format=source_format,
            target_format=target_format,
            loss_trace=arrays["loss_trace"].tolist(),
        )
    if kind == "boosted":
        base = _config_from(meta["base_config"])
        model = BoostedEnsemble(
            stages=meta["max_stages"], base_config=base, seed=meta["seed"]
        )
        model.target_format = target_format
        model.variables = tuple(meta["variables"]) if meta["variables"] else None
        model.n_features = meta["n_features"]
        n_net_layers = len(base.hidden_sizes) + 1
        model.stages = []
        model.stage_weights = []
        for vi, count in enumerate(meta["stage_counts"]):
            model.stage_weights.append(arrays[f"v{vi}_weights"])
            nets = []
            for si in range(count):
                prefix = f"v{vi}s{si}_"
                nets.append(
                    FfnnModel(
                        replace(base, seed=meta["stage_seeds"][vi][si]),
                        weights=[arrays[f"{prefix}W{i}"] for i in range(n_net_layers)],
                        biases=[arrays[f"{prefix}b{i}"] for i in range(n_net_layers)],
                    )
                )
            model.stages.append(nets)
        return model
    raise ParseError(f"unknown model kind {kind!r}")
