"""
Counter-based deterministic random streams.

Every draw re-seeds a private ``torch.Generator`` from ``hash(seed, counter)``
and then advances the counter, so a stream is fully described by two
integers.  That makes streams trivially checkpointable and lets parallel
workers derive non-overlapping sub-streams by label.

Usage
-----
::

    from src.lddgan.core.rng import RngStream, gaussian_sample

    stream = RngStream(seed=0)
    z = gaussian_sample(stream, (16, 25))
    noise_stream = stream.derive("posterior-noise")
"""
from __future__ import annotations

import hashlib
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass

import torch

from src.lddgan._errors import ShapeError

_MASK64 = (1 << 64) - 1


def _mix(*parts: object) -> int:
    """Hash arbitrary parts into an unsigned 64-bit integer."""
    payload = ":".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in shape)
    if not dims:
        raise ShapeError("rng", "shape must have at least one extent")
    if any(d <= 0 for d in dims):
        raise ShapeError("rng", f"shape extents must be positive, got {list(dims)}")
    return dims


@dataclass
class RngStream:
    """Deterministic random stream.

    Parameters
    ----------
    seed:
        64-bit seed.  Negative or oversized values are folded into 64 bits.
    counter:
        Number of draws taken so far.
    """

    seed: int
    counter: int = 0

    def __post_init__(self) -> None:
        self.seed = int(self.seed) & _MASK64

    def derive(self, label: str) -> RngStream:
        """Return an independent stream; distinct labels give distinct streams."""
        return RngStream(seed=_mix(self.seed, "derive", label))

    def _next_generator(self) -> torch.Generator:
        gen = torch.Generator(device="cpu")
        gen.manual_seed(_mix(self.seed, self.counter))
        self.counter += 1
        return gen

    def gaussian(self, shape: Sequence[int], dtype: torch.dtype | None = None) -> torch.Tensor:
        dims = _check_shape(shape)
        return torch.randn(dims, generator=self._next_generator(), dtype=dtype)

    def uniform(self, shape: Sequence[int], dtype: torch.dtype | None = None) -> torch.Tensor:
        dims = _check_shape(shape)
        return torch.rand(dims, generator=self._next_generator(), dtype=dtype)

    def integers(self, low: int, high: int, shape: Sequence[int]) -> torch.Tensor:
        """Uniform integers in ``[low, high]`` (inclusive)."""
        dims = _check_shape(shape)
        return torch.randint(low, high + 1, dims, generator=self._next_generator())

    def permutation(self, n: int) -> torch.Tensor:
        return torch.randperm(n, generator=self._next_generator())

    def state(self) -> tuple[int, int]:
        return self.seed, self.counter


def gaussian_sample(
    stream: RngStream, shape: Sequence[int], dtype: torch.dtype | None = None
) -> torch.Tensor:
    """I.i.d. standard normal tensor of *shape*; advances *stream* by one draw.

    Raises
    ------
    ShapeError
        If *shape* is empty or has a non-positive extent.
    """
    return stream.gaussian(shape, dtype=dtype)


@contextmanager
def seeded(stream: RngStream) -> Iterator[None]:
    """Run the block with torch's global generator seeded from *stream*.

    Used for module initialization; the global state is restored afterwards.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(_mix(stream.seed, stream.counter) & ((1 << 63) - 1))
        stream.counter += 1
        yield
