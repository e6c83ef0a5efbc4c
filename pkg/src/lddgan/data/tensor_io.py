"""
Little-endian binary tensor formats.

LDDG (named tensor bundle, used for checkpoints)::

    b"LDDG"  u32 version=1  u32 count
    count x { u16 name_len, utf-8 name, u8 dtype, u8 rank, u32 dims[rank], raw data }

LDDT (single unnamed tensor)::

    b"LDDT"  u32 version=1  u8 dtype  u8 rank  u32 dims[rank]  raw data

dtype codes: 0 = float32, 1 = float64.  Tensors are written in sorted name
order so equal contents give equal bytes.
"""
from __future__ import annotations

import struct
from collections.abc import Mapping
from pathlib import Path

import numpy as np
import torch

from src.lddgan._errors import FormatError, ShapeError

BUNDLE_MAGIC = b"LDDG"
TENSOR_MAGIC = b"LDDT"
VERSION = 1

_DTYPE_CODES: dict[torch.dtype, int] = {torch.float32: 0, torch.float64: 1}
_NUMPY_DTYPES: dict[int, str] = {0: "<f4", 1: "<f8"}


# ─────────────────────────── encoding ────────────────────────────────────────


def _encode_body(t: torch.Tensor, component: str) -> bytes:
    if t.dtype not in _DTYPE_CODES:
        raise FormatError(component, f"unsupported dtype {t.dtype}")
    code = _DTYPE_CODES[t.dtype]
    dims = tuple(t.shape)
    head = struct.pack("<BB", code, len(dims)) + struct.pack(f"<{len(dims)}I", *dims)
    data = t.detach().cpu().contiguous().numpy().astype(_NUMPY_DTYPES[code], copy=False)
    return head + data.tobytes()


def encode_bundle(tensors: Mapping[str, torch.Tensor]) -> bytes:
    parts = [BUNDLE_MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name in sorted(tensors):
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(_encode_body(tensors[name], "checkpoint"))
    return b"".join(parts)


def encode_tensor(t: torch.Tensor) -> bytes:
    return TENSOR_MAGIC + struct.pack("<I", VERSION) + _encode_body(t, "tensor_file")


# ─────────────────────────── decoding ────────────────────────────────────────


class _Reader:
    """Cursor over a byte buffer that raises FormatError on truncation."""

    def __init__(self, buf: bytes, component: str) -> None:
        self.buf = buf
        self.pos = 0
        self.component = component

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(
                self.component, f"truncated while reading {what}", offset=self.pos
            )
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple[int, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def header(self, magic: bytes) -> None:
        got = self.take(4, "magic")
        if got != magic:
            raise FormatError(self.component, f"bad magic {got!r}, expected {magic!r}", offset=0)
        (version,) = self.unpack("<I", "version")
        if version != VERSION:
            raise FormatError(self.component, f"unsupported version {version}", offset=4)

    def tensor(self) -> torch.Tensor:
        start = self.pos
        code, rank = self.unpack("<BB", "dtype/rank")
        if code not in _NUMPY_DTYPES:
            raise FormatError(self.component, f"unknown dtype code {code}", offset=start)
        dims = self.unpack(f"<{rank}I", "dims") if rank else ()
        dtype = np.dtype(_NUMPY_DTYPES[code])
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        raw = self.take(count * dtype.itemsize, "tensor data")
        arr = np.frombuffer(raw, dtype=dtype).reshape(dims)
        return torch.from_numpy(arr.astype(dtype.newbyteorder("="), copy=True))


def decode_bundle(buf: bytes) -> dict[str, torch.Tensor]:
    r = _Reader(buf, "checkpoint")
    r.header(BUNDLE_MAGIC)
    (count,) = r.unpack("<I", "tensor count")
    out: dict[str, torch.Tensor] = {}
    for _ in range(count):
        (n,) = r.unpack("<H", "name length")
        at = r.pos
        try:
            name = r.take(n, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("checkpoint", "tensor name is not UTF-8", offset=at) from exc
        out[name] = r.tensor()
    if r.pos != len(buf):
        raise FormatError("checkpoint", "trailing bytes after last tensor", offset=r.pos)
    return out


def decode_tensor(buf: bytes) -> torch.Tensor:
    r = _Reader(buf, "tensor_file")
    r.header(TENSOR_MAGIC)
    t = r.tensor()
    if r.pos != len(buf):
        raise FormatError("tensor_file", "trailing bytes after tensor", offset=r.pos)
    return t


# ─────────────────────────── files ───────────────────────────────────────────


def write_bundle(path: str | Path, tensors: Mapping[str, torch.Tensor]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(encode_bundle(tensors))
    return p


def read_bundle(path: str | Path) -> dict[str, torch.Tensor]:
    return decode_bundle(Path(path).read_bytes())


def save_tensor_file(path: str | Path, t: torch.Tensor) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(encode_tensor(t))
    return p


def load_tensor_file(path: str | Path) -> torch.Tensor:
    """Read one LDDT tensor.

    Raises
    ------
    FormatError
        On bad magic, unsupported version or truncation (with byte offset).
    """
    return decode_tensor(Path(path).read_bytes())


# ─────────────────────────── module state ────────────────────────────────────


def module_tensors(module: torch.nn.Module, prefix: str) -> dict[str, torch.Tensor]:
    """``state_dict`` of *module* with every name prefixed ``"{prefix}."``."""
    return {f"{prefix}.{k}": v.detach() for k, v in module.state_dict().items()}


def restore_module_(
    module: torch.nn.Module, tensors: Mapping[str, torch.Tensor], prefix: str
) -> None:
    """Load ``"{prefix}.*"`` tensors into *module*.

    Raises
    ------
    ShapeError
        Naming the first tensor that is missing or has a different shape.
    """
    own = module.state_dict()
    lead = f"{prefix}."
    extra = sorted(k for k in tensors if k.startswith(lead) and k[len(lead) :] not in own)
    if extra:
        raise ShapeError("checkpoint", f"unexpected tensor {extra[0]!r}")
    loaded: dict[str, torch.Tensor] = {}
    for name, ref in own.items():
        key = lead + name
        if key not in tensors:
            raise ShapeError("checkpoint", f"missing tensor {key!r}")
        value = tensors[key]
        if value.shape != ref.shape:
            raise ShapeError(
                "checkpoint",
                f"tensor {key!r}: stored {tuple(value.shape)} vs model {tuple(ref.shape)}",
            )
        loaded[name] = value.to(ref.dtype)
    module.load_state_dict(loaded)
