"""Symbolic precode and rateless code.

Coded packets are tracked by identity only. Under the ideal-code
assumption any ``k`` distinct coded packets of a file decode it, so the
payload bytes never matter for delay; byte sizes exist for overhead
accounting.

The inverse code rate is called ``M`` throughout (the appendix of the
source analysis calls the same quantity ``N``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

INFINITE = math.inf

MIN_PACKET_BYTES = 300


class EmptyBufferError(LookupError):
    """Sampling was requested from an empty packet set."""


@dataclass(frozen=True)
class FileSpec:
    k: int = 1000
    packet_bytes: int = 1000
    M: float = 3

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if self.packet_bytes < MIN_PACKET_BYTES:
            raise ValueError(
                f"packet_bytes must be >= {MIN_PACKET_BYTES} to carry a signature")
        if not math.isinf(self.M):
            if self.M != int(self.M) or self.M < 2:
                raise ValueError(f"finite M must be an integer >= 2, got {self.M!r}")
            object.__setattr__(self, "M", int(self.M))

    @property
    def rateless(self) -> bool:
        return math.isinf(self.M)


class Kind(enum.IntEnum):
    DATA = 0
    HASH = 1
    RATELESS = 2


class CodedPacket(NamedTuple):
    kind: Kind
    id: int
    authentic: bool = True
    size_bytes: int = 1000


def coded_id_space(spec: FileSpec) -> int:
    """Number of distinct precoded packets, ``M * k``."""
    if spec.rateless:
        raise ValueError("a rateless code has an unbounded id space")
    return spec.M * spec.k


@dataclass
class DecodeState:
    received: set = field(default_factory=set)
    decoded: bool = False


def try_decode(state: DecodeState, spec: FileSpec, threshold: int | None = None) -> bool:
    """Mark ``state`` decoded once it holds ``threshold`` (default ``k``) ids."""
    if not state.decoded and len(state.received) >= (threshold or spec.k):
        state.decoded = True
    return state.decoded


def buffer_fullness(state: DecodeState, spec: FileSpec) -> float:
    """``|received| / k`` before decoding, ``M`` afterwards."""
    if state.decoded:
        return float(spec.M)
    return len(state.received) / spec.k


class FreshIds:
    """Never-repeating id stream for rateless emitters.

    One instance is shared per run so ids stay globally unique.
    """

    def __init__(self, start: int = 0):
        self._next = start

    def __call__(self) -> int:
        i = self._next
        self._next += 1
        return i

    def __len__(self) -> int:
        # treated as non-empty: a rateless source never runs dry
        return 1


def sample_fresh_coded(rng, spec: FileSpec, available) -> int:
    """Draw one coded id uniformly from ``available``.

    ``available`` may be a ``range`` (e.g. the full precoded space), any
    sized sequence or set, or a :class:`FreshIds` stream for a rateless
    source.
    """
    if isinstance(available, FreshIds):
        return available()
    if len(available) == 0:
        raise EmptyBufferError("no coded packet available to send")
    if isinstance(available, range):
        return available[int(rng.integers(len(available)))]
    if isinstance(available, (set, frozenset)):
        available = sorted(available)
    return available[int(rng.integers(len(available)))]
