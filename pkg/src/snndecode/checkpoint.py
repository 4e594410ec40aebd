"""Versioned binary container for trained models.

Layout (all little-endian)::

    bytes 0..3   magic  b"SNNC"
    bytes 4..5   format version, uint16 (currently 1)
    bytes 6..9   header length in bytes, uint32
    header       UTF-8 JSON, keys sorted: {"kind", "meta", "arrays"}
                 where "arrays" is an ordered list of
                 [name, dtype_str, shape_list] entries
    payload      raw array bytes, C order, concatenated in manifest order

Everything after the magic is a pure function of the saved content —
no timestamps, hostnames, or dict-iteration nondeterminism — so saving
the same model twice produces byte-identical files.  Two kinds share
the container: ``"snn"`` (network parameters + architecture +
standardizer) and ``"kf"`` (Kalman model + standardizer).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .data import Standardizer
from .errors import DataError
from .kalman import KfModel
from .network import LayerParams, NetworkParams, NetworkSpec, NormParams

MAGIC = b"SNNC"
VERSION = 1

KIND_SNN = "snn"
KIND_KF = "kf"

_HEAD = struct.Struct("<HI")        # version, header byte length


def _write_container(path, kind: str, meta: dict, arrays) -> None:
    """``arrays`` is an ordered list of (name, ndarray) pairs."""
    manifest = []
    blobs = []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        manifest.append([name, arr.dtype.str, list(arr.shape)])
        blobs.append(arr.tobytes())
    header = json.dumps(
        {"arrays": manifest, "kind": kind, "meta": meta},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEAD.pack(VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def _read_container(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:4] != MAGIC:
        raise DataError(f"{path}: not a model checkpoint (bad magic)")
    version, hlen = _HEAD.unpack_from(raw, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(raw[10:10 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt checkpoint header: {exc}") from exc
    arrays = {}
    offset = 10 + hlen
    for name, dtype_str, shape in header["arrays"]:
        dtype = np.dtype(dtype_str)
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + count * dtype.itemsize
        if end > len(raw):
            raise DataError(f"{path}: truncated checkpoint (array {name!r})")
        arrays[name] = np.frombuffer(
            raw[offset:end], dtype=dtype).reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise DataError(f"{path}: trailing bytes after checkpoint payload")
    return header["kind"], header["meta"], arrays


def read_kind(path) -> str:
    """Peek at which model family a checkpoint holds."""
    kind, _, _ = _read_container(path)
    return kind


def _standardizer_arrays(std: Standardizer):
    return [
        ("std.feat_mean", std.feat_mean),
        ("std.feat_std", std.feat_std),
        ("std.vel_mean", std.vel_mean),
        ("std.vel_std", std.vel_std),
    ]


def _standardizer_from(arrays, meta) -> Standardizer:
    return Standardizer(
        feat_mean=arrays["std.feat_mean"],
        feat_std=arrays["std.feat_std"],
        vel_mean=arrays["std.vel_mean"],
        vel_std=arrays["std.vel_std"],
        degenerate_channels=tuple(meta["degenerate_channels"]),
    )


def save_snn(path, params: NetworkParams, spec: NetworkSpec,
             standardizer: Standardizer, extra: dict | None = None) -> None:
    """Write a trained spiking decoder plus its input/output scaling."""
    meta = {
        "spec": {
            "layer_widths": list(spec.layer_widths),
            "threshold": spec.threshold,
            "dropout_p": spec.dropout_p,
            "window_len": spec.window_len,
            "reset_mode": spec.reset_mode,
            "normalize_output": spec.normalize_output,
            "dropout_before_output": spec.dropout_before_output,
            "bn_eps": spec.bn_eps,
            "bn_momentum": spec.bn_momentum,
        },
        "degenerate_channels": list(standardizer.degenerate_channels),
        "extra": extra or {},
    }
    arrays = []
    for l, layer in enumerate(params.layers):
        arrays.append((f"layer{l}.weight", layer.weight))
        arrays.append((f"layer{l}.tau", layer.tau))
        arrays.append((f"layer{l}.gamma", layer.norm.gamma))
        arrays.append((f"layer{l}.beta", layer.norm.beta))
        arrays.append((f"layer{l}.run_mean", layer.norm.run_mean))
        arrays.append((f"layer{l}.run_var", layer.norm.run_var))
    arrays.extend(_standardizer_arrays(standardizer))
    _write_container(path, KIND_SNN, meta, arrays)


def load_snn(path):
    """Read back (params, spec, standardizer, extra) saved by save_snn."""
    kind, meta, arrays = _read_container(path)
    if kind != KIND_SNN:
        raise DataError(f"{path}: expected an snn checkpoint, found {kind!r}")
    sd = meta["spec"]
    spec = NetworkSpec(
        layer_widths=tuple(sd["layer_widths"]),
        threshold=sd["threshold"],
        dropout_p=sd["dropout_p"],
        window_len=sd["window_len"],
        reset_mode=sd["reset_mode"],
        normalize_output=sd["normalize_output"],
        dropout_before_output=sd["dropout_before_output"],
        bn_eps=sd["bn_eps"],
        bn_momentum=sd["bn_momentum"],
    )
    layers = []
    for l in range(spec.n_layers):
        try:
            layers.append(LayerParams(
                weight=arrays[f"layer{l}.weight"],
                tau=arrays[f"layer{l}.tau"],
                norm=NormParams(
                    gamma=arrays[f"layer{l}.gamma"],
                    beta=arrays[f"layer{l}.beta"],
                    run_mean=arrays[f"layer{l}.run_mean"],
                    run_var=arrays[f"layer{l}.run_var"],
                ),
            ))
        except KeyError as exc:
            raise DataError(f"{path}: checkpoint missing array {exc}") from exc
    params = NetworkParams(layers=layers)
    return params, spec, _standardizer_from(arrays, meta), meta["extra"]


def save_kf(path, model: KfModel, standardizer: Standardizer,
            extra: dict | None = None) -> None:
    """Write a fitted Kalman baseline in the same container family."""
    meta = {
        "degenerate_channels": list(standardizer.degenerate_channels),
        "ridge": model.ridge,
        "extra": extra or {},
    }
    arrays = [
        ("kf.A", model.A),
        ("kf.W", model.W),
        ("kf.C", model.C),
        ("kf.Q", model.Q),
    ]
    arrays.extend(_standardizer_arrays(standardizer))
    _write_container(path, KIND_KF, meta, arrays)


def load_kf(path):
    """Read back (model, standardizer, extra) saved by save_kf."""
    kind, meta, arrays = _read_container(path)
    if kind != KIND_KF:
        raise DataError(f"{path}: expected a kf checkpoint, found {kind!r}")
    model = KfModel(A=arrays["kf.A"], W=arrays["kf.W"],
                    C=arrays["kf.C"], Q=arrays["kf.Q"],
                    ridge=meta["ridge"])
    return model, _standardizer_from(arrays, meta), meta["extra"]
