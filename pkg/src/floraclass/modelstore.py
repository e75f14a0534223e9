"""Model serialization (.fmdl) and post-training weight quantization.

File layout (byte-exact description in docs/format.md): 4 magic bytes
"FMDL", a little-endian u32 format version, a little-endian u32 header
length, a UTF-8 JSON header, then the weight payload as concatenated
little-endian tensor buffers. One file can hold several models sharing a
class list, so an ensemble file's payload is exactly the sum of its
members' payloads plus a single header.

Quantization is weights-only (no activation calibration). f16 halves the
payload; i8-affine quarters it using per-tensor scale/zero-point with
min mapped to -128. A constant tensor gets scale 0 and its value stored
in the zero-point slot, reconstructing exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from floraclass.errors import FormatError
from floraclass.ensemble import EnsembleModel
from floraclass.nn.model import (
    F16,
    F32,
    I8_AFFINE,
    LayerSpec,
    ModelSpec,
    ModelWeights,
)

MAGIC = b"FMDL"
VERSION = 1
_PREFIX = struct.Struct("<4sII")  # magic, version, header byte length

_DTYPES = {F32: "<f4", F16: "<f2", I8_AFFINE: "i1"}
_TAGS = {F32: "f32", F16: "f16", I8_AFFINE: "i8"}
_BYTES_PER = {"f32": 4, "f16": 2, "i8": 1}


def quantize_f16(weights: ModelWeights) -> ModelWeights:
    """Store parameters at 16-bit float precision."""
    if weights.precision != F32:
        raise FormatError(f"can only quantize f32 weights, got {weights.precision}")
    return ModelWeights(
        layers=[
            {k: v.astype(np.float16) for k, v in layer.items()}
            for layer in weights.layers
        ],
        precision=F16,
    )


def quantize_i8(weights: ModelWeights) -> ModelWeights:
    """Per-tensor affine int8: scale = (max - min) / 255, min maps to -128."""
    if weights.precision != F32:
        raise FormatError(f"can only quantize f32 weights, got {weights.precision}")
    layers: list[dict[str, np.ndarray]] = []
    quant: dict[str, tuple[float, float]] = {}
    for i, layer in enumerate(weights.layers):
        out: dict[str, np.ndarray] = {}
        for name, w in layer.items():
            w64 = w.astype(np.float64)
            lo = float(w64.min())
            hi = float(w64.max())
            if hi == lo:
                out[name] = np.zeros(w.shape, dtype=np.int8)
                quant[f"{i}.{name}"] = (0.0, lo)
                continue
            scale = (hi - lo) / 255.0
            zero_point = -128.0 - lo / scale
            q = np.clip(np.rint(w64 / scale + zero_point), -128, 127)
            out[name] = q.astype(np.int8)
            quant[f"{i}.{name}"] = (scale, zero_point)
        layers.append(out)
    return ModelWeights(layers=layers, precision=I8_AFFINE, quant=quant)


def _layer_dict(layer: LayerSpec) -> dict:
    return {
        "kind": layer.kind,
        "kernel_size": layer.kernel_size,
        "stride": layer.stride,
        "padding": layer.padding,
        "out_channels": layer.out_channels,
        "units": layer.units,
    }


def _encode_model(
    spec: ModelSpec, weights: ModelWeights, offset: int
) -> tuple[dict, list[bytes], int]:
    dtype = _DTYPES[weights.precision]
    tag = _TAGS[weights.precision]
    tensors = []
    buffers: list[bytes] = []
    for i, layer in enumerate(weights.layers):
        for name in sorted(layer):
            arr = np.ascontiguousarray(layer[name].astype(dtype, copy=False))
            raw = arr.tobytes()
            entry = {
                "layer": i,
                "param": name,
                "shape": list(arr.shape),
                "dtype": tag,
                "offset": offset,
                "nbytes": len(raw),
            }
            if weights.precision == I8_AFFINE:
                scale, zero_point = weights.quant[f"{i}.{name}"]
                entry["scale"] = scale
                entry["zero_point"] = zero_point
            tensors.append(entry)
            buffers.append(raw)
            offset += len(raw)
    descriptor = {
        "name": spec.name,
        "input_shape": list(spec.input_shape),
        "num_classes": spec.num_classes,
        "layers": [_layer_dict(l) for l in spec.layers],
        "precision": weights.precision,
        "tensors": tensors,
    }
    return descriptor, buffers, offset


def _write(path: Path, class_names: list[str], pairs: list[tuple[ModelSpec, ModelWeights]]) -> None:
    models = []
    buffers: list[bytes] = []
    offset = 0
    for spec, weights in pairs:
        descriptor, bufs, offset = _encode_model(spec, weights, offset)
        models.append(descriptor)
        buffers.extend(bufs)
    header = json.dumps(
        {"class_names": list(class_names), "models": models},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(header)))
        fh.write(header)
        for raw in buffers:
            fh.write(raw)


def save(
    spec: ModelSpec,
    weights: ModelWeights,
    class_names: list[str],
    path: str | Path,
) -> None:
    """Write a single model; load() is its exact inverse for f32 weights."""
    if len(class_names) != spec.num_classes:
        raise FormatError(
            f"{len(class_names)} class names for a {spec.num_classes}-class model"
        )
    _write(Path(path), class_names, [(spec, weights)])


def save_ensemble(ens: EnsembleModel, path: str | Path) -> None:
    """Write all ensemble members into one file with a shared class list."""
    _write(Path(path), ens.class_names, ens.members)


def _read_header(path: Path) -> tuple[dict, bytes]:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read model file {path}: {exc}") from exc
    if len(blob) < _PREFIX.size:
        raise FormatError(f"{path} is too short to be a model file")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path} is not a model file (bad magic {magic!r})")
    if version != VERSION:
        raise FormatError(
            f"{path} has unsupported format version {version} (supported: {VERSION})"
        )
    if len(blob) < _PREFIX.size + header_len:
        raise FormatError(f"{path}: truncated header")
    header = json.loads(blob[_PREFIX.size : _PREFIX.size + header_len].decode("utf-8"))
    payload = blob[_PREFIX.size + header_len :]
    expected = sum(
        t["nbytes"] for model in header["models"] for t in model["tensors"]
    )
    if len(payload) != expected:
        raise FormatError(
            f"{path}: expected {expected} payload bytes, found {len(payload)}"
        )
    return header, payload


def _decode_model(descriptor: dict, payload: bytes) -> tuple[ModelSpec, ModelWeights]:
    spec = ModelSpec(
        name=descriptor["name"],
        input_shape=tuple(descriptor["input_shape"]),
        num_classes=descriptor["num_classes"],
        layers=tuple(LayerSpec(**d) for d in descriptor["layers"]),
    )
    precision = descriptor["precision"]
    if precision not in _DTYPES:
        raise FormatError(f"unknown precision tag {precision!r}")
    layers: list[dict[str, np.ndarray]] = [dict() for _ in spec.layers]
    quant: dict[str, tuple[float, float]] = {}
    for t in descriptor["tensors"]:
        count = int(np.prod(t["shape"])) if t["shape"] else 1
        if t["nbytes"] != count * _BYTES_PER[t["dtype"]]:
            raise FormatError(
                f"tensor layer{t['layer']}.{t['param']}: nbytes {t['nbytes']} "
                f"inconsistent with shape {t['shape']}"
            )
        raw = payload[t["offset"] : t["offset"] + t["nbytes"]]
        arr = np.frombuffer(raw, dtype=_DTYPES[precision]).reshape(t["shape"]).copy()
        layers[t["layer"]][t["param"]] = arr
        if precision == I8_AFFINE:
            quant[f"{t['layer']}.{t['param']}"] = (t["scale"], t["zero_point"])
    weights = ModelWeights(layers=layers, precision=precision, quant=quant)
    return spec, weights


def load_models(path: str | Path) -> tuple[list[tuple[ModelSpec, ModelWeights]], list[str]]:
    header, payload = _read_header(Path(path))
    pairs = [_decode_model(d, payload) for d in header["models"]]
    return pairs, list(header["class_names"])


def load(path: str | Path) -> tuple[ModelSpec, ModelWeights, list[str]]:
    """Read a single-model file."""
    pairs, class_names = load_models(path)
    if len(pairs) != 1:
        raise FormatError(
            f"{path} holds {len(pairs)} models; use load_ensemble for multi-model files"
        )
    spec, weights = pairs[0]
    return spec, weights, class_names


def load_ensemble(path: str | Path) -> EnsembleModel:
    """Read any model file as an ensemble (single models become m=1)."""
    pairs, class_names = load_models(path)
    return EnsembleModel.from_members(
        [(spec, weights, class_names) for spec, weights in pairs],
        name=pairs[0][0].name if len(pairs) == 1 else "ensemble",
    )


def model_size_bytes(path: str | Path) -> int:
    """Total file size, header included."""
    return Path(path).stat().st_size


def payload_size_bytes(path: str | Path) -> int:
    """Weight payload size, excluding the fixed-prefix and JSON header."""
    _, payload = _read_header(Path(path))
    return len(payload)
