"""
Binary PGM (P5) images: directory ingestion and sample-grid writing.

Pixels are returned as float32 ``(N, 1, H, W)``; with ``normalize`` they are
mapped from ``[0, maxval]`` to ``[-1, 1]``.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from src.lddgan._errors import ConfigError, FormatError


def _header_tokens(buf: bytes, count: int) -> tuple[list[int], int]:
    """Read *count* whitespace-separated integers after the magic, skipping comments."""
    tokens: list[int] = []
    pos = 2
    while len(tokens) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(buf):
            raise FormatError("pgm", "truncated header", offset=pos)
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and buf[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError("pgm", "non-numeric header field", offset=start)
        tokens.append(int(buf[start:pos]))
    # exactly one whitespace byte separates header and raster
    return tokens, pos + 1


def decode_pgm(buf: bytes) -> np.ndarray:
    """Decode one P5 image to a ``(H, W)`` float32 array scaled to ``[0, 1]``."""
    if buf[:2] != b"P5":
        raise FormatError("pgm", f"bad magic {buf[:2]!r}, expected b'P5'", offset=0)
    (width, height, maxval), start = _header_tokens(buf, 3)
    if not 0 < maxval < 65536:
        raise FormatError("pgm", f"maxval {maxval} out of range", offset=start)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    if len(buf) - start < need:
        raise FormatError("pgm", "truncated raster", offset=len(buf))
    raster = np.frombuffer(buf[start : start + need], dtype=dtype).reshape(height, width)
    return raster.astype(np.float32) / np.float32(maxval)


def encode_pgm(levels: np.ndarray) -> bytes:
    """Encode a ``(H, W)`` uint8 array as P5."""
    h, w = levels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + levels.astype(np.uint8).tobytes()


def load_pgm_dir(path: str | Path, normalize: bool = True) -> torch.Tensor:
    """Load every ``*.pgm`` file in *path* (sorted by name) into one batch.

    Raises
    ------
    ConfigError
        If the directory is missing, empty, or images differ in size.
    """
    root = Path(path)
    if not root.is_dir():
        raise ConfigError("data", f"image directory not found: {root}")
    files = sorted(root.glob("*.pgm"))
    if not files:
        raise ConfigError("data", f"no .pgm files in {root}")
    images = []
    for f in files:
        try:
            images.append(decode_pgm(f.read_bytes()))
        except FormatError as exc:
            raise FormatError("pgm", f"{f.name}: {exc}") from exc
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ConfigError("data", f"images in {root} have mixed sizes: {sorted(shapes)}")
    batch = torch.from_numpy(np.stack(images)).unsqueeze(1)
    return batch * 2.0 - 1.0 if normalize else batch


def to_levels(images: torch.Tensor) -> np.ndarray:
    """Map ``[-1, 1]`` pixels to uint8 levels."""
    x = ((images.detach().float().clamp(-1.0, 1.0) + 1.0) * 127.5).round()
    return x.to(torch.uint8).cpu().numpy()


def write_pgm_grid(path: str | Path, images: torch.Tensor, ncols: int = 10) -> Path:
    """Tile single-channel ``(N, 1, H, W)`` images in ``[-1, 1]`` into one PGM."""
    if images.dim() != 4 or images.shape[1] != 1:
        raise ConfigError("data", f"expected (N, 1, H, W) images, got {tuple(images.shape)}")
    n, _, h, w = images.shape
    ncols = max(1, min(ncols, n))
    nrows = -(-n // ncols)
    grid = np.zeros((nrows * h, ncols * w), dtype=np.uint8)
    levels = to_levels(images[:, 0])
    for i in range(n):
        r, c = divmod(i, ncols)
        grid[r * h : (r + 1) * h, c * w : (c + 1) * w] = levels[i]
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(encode_pgm(grid))
    return p
