"""Versioned binary weight container.

Layout: magic bytes ``DVMW``, a little-endian uint32 version, a uint32
header length, a UTF-8 JSON header, then the tensor payloads concatenated
as little-endian float32 in header order. The header lists every tensor as
{name, shape, dtype} and embeds the full model spec, so a file is
self-describing. Round-trips are bit-exact at 32-bit precision.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import WeightFormatError
from .model import ModelSpec, Network, build

MAGIC = b"DVMW"
VERSION = 1

NORMALIZER_MEAN = "normalizer.mean"
NORMALIZER_STD = "normalizer.std"


def _header_bytes(net: Network, extra: list[tuple[str, np.ndarray]]) -> bytes:
    records = [
        {"name": name, "shape": list(t.shape), "dtype": "f32"}
        for name, t in net.named_tensors()
    ]
    records += [
        {"name": name, "shape": list(a.shape), "dtype": "f32"} for name, a in extra
    ]
    header = {"version": VERSION, "spec": net.spec.to_dict(), "tensors": records}
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save(path, net: Network, normalizer=None) -> None:
    """Write the network (and optionally its input normalizer) to ``path``."""
    extra: list[tuple[str, np.ndarray]] = []
    if normalizer is not None:
        extra.append((NORMALIZER_MEAN, np.asarray(normalizer.mean, dtype=np.float64)))
        extra.append((NORMALIZER_STD, np.asarray(normalizer.std, dtype=np.float64)))
    header = _header_bytes(net, extra)
    arrays = [t.data for _, t in net.named_tensors()] + [a for _, a in extra]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load(path) -> tuple[Network, "Normalizer | None"]:
    """Read a container; returns (network, normalizer-or-None)."""
    from .data import Normalizer  # local import to avoid a cycle

    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise WeightFormatError(f"{path}: file too short to contain a header")
    if raw[:4] != MAGIC:
        raise WeightFormatError(f"{path}: bad magic bytes {raw[:4]!r}")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise WeightFormatError(f"{path}: unsupported version {version}")
    if len(raw) < 12 + header_len:
        raise WeightFormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"{path}: unreadable header ({exc})") from exc

    try:
        spec = ModelSpec.from_dict(header["spec"])
        records = header["tensors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFormatError(f"{path}: malformed header ({exc})") from exc

    payload = raw[12 + header_len :]
    expected = sum(int(np.prod(r["shape"], dtype=np.int64)) for r in records) * 4
    if len(payload) != expected:
        raise WeightFormatError(
            f"{path}: payload holds {len(payload)} bytes but the header "
            f"declares {expected}"
        )

    net = build(spec, seed=0)
    wanted = dict(net.named_tensors())
    loaded: dict[str, np.ndarray] = {}
    offset = 0
    for r in records:
        shape = tuple(int(s) for s in r["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        offset += count * 4
        loaded[r["name"]] = values.astype(np.float64).reshape(shape)

    extras = {NORMALIZER_MEAN, NORMALIZER_STD}
    missing = set(wanted) - set(loaded)
    unexpected = set(loaded) - set(wanted) - extras
    if missing or unexpected:
        raise WeightFormatError(
            f"{path}: tensor records disagree with the architecture "
            f"(missing {sorted(missing)}, unexpected {sorted(unexpected)})"
        )
    for name, tensor in wanted.items():
        if loaded[name].shape != tensor.shape:
            raise WeightFormatError(
                f"{path}: tensor {name} has shape {loaded[name].shape}, "
                f"expected {tensor.shape}"
            )
        tensor.data[...] = loaded[name]

    normalizer = None
    if NORMALIZER_MEAN in loaded and NORMALIZER_STD in loaded:
        normalizer = Normalizer(mean=loaded[NORMALIZER_MEAN], std=loaded[NORMALIZER_STD])
    return net, normalizer


def load_network(path) -> Network:
    return load(path)[0]
