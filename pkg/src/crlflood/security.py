"""Hash-information packets, packet verification and the pollution adversary.

Hashes are not computed during simulation: a data packet carries a
ground-truth ``authentic`` flag, and a node can judge it once the hash
covering its id is known.

The hash set itself travels as a systematic rateless code of signed
packets. Hash-info ids below ``total_hash_packets`` are the systematic
ones: id ``h`` carries the hashes of data ids ``h*per .. h*per + per - 1``.
Higher ids are repair packets that only help once the ledger holds
``total_hash_packets`` distinct ids, at which point every hash is known.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field

from .coding import CodedPacket, FileSpec, Kind, coded_id_space


@dataclass(frozen=True)
class OverheadConfig:
    signature_bytes: int = 256
    hash_bytes: int = 20

    def __post_init__(self):
        if self.signature_bytes < 1:
            raise ValueError("signature_bytes must be positive")
        if self.hash_bytes < 1:
            raise ValueError("hash_bytes must be >= 1")


def hash_packet_count(spec: FileSpec, overhead: OverheadConfig = OverheadConfig()) -> tuple[int, int]:
    """``(hashes_per_packet, packet_count)`` for a finite-rate precode."""
    payload = spec.packet_bytes - overhead.signature_bytes
    if payload <= 0:
        raise ValueError("packet_bytes must exceed signature_bytes")
    per = payload // overhead.hash_bytes
    if per < 1:
        raise ValueError("a hash does not fit next to the signature")
    return per, math.ceil(coded_id_space(spec) / per)


def hash_overhead(spec: FileSpec, overhead: OverheadConfig = OverheadConfig()) -> float:
    """Hash-information packets as a fraction of the ``k`` file packets."""
    return hash_packet_count(spec, overhead)[1] / spec.k


def signed_packet_count(spec: FileSpec, overhead: OverheadConfig = OverheadConfig()) -> int:
    """File size in packets when each packet reserves room for a signature."""
    payload = spec.packet_bytes - overhead.signature_bytes
    if payload <= 0:
        raise ValueError("packet_bytes must exceed signature_bytes")
    return math.ceil(spec.k * spec.packet_bytes / payload)


class Verdict(enum.Enum):
    AUTHENTIC = "authentic"
    POLLUTED = "polluted"
    UNKNOWN = "unknown"


@dataclass
class HashLedger:
    total_hash_packets: int
    hashes_per_packet: int
    received_hash_packets: set = field(default_factory=set)

    @classmethod
    def for_file(cls, spec: FileSpec, overhead: OverheadConfig = OverheadConfig(),
                 complete: bool = False) -> "HashLedger":
        per, count = hash_packet_count(spec, overhead)
        got = set(range(count)) if complete else set()
        return cls(count, per, got)

    @property
    def complete(self) -> bool:
        return len(self.received_hash_packets) >= self.total_hash_packets

    def block_of(self, data_id: int) -> int:
        return data_id // self.hashes_per_packet

    def covers(self, data_id: int) -> bool:
        return (data_id // self.hashes_per_packet in self.received_hash_packets
                or len(self.received_hash_packets) >= self.total_hash_packets)

    def block_ids(self, hash_id: int) -> range:
        lo = hash_id * self.hashes_per_packet
        return range(lo, lo + self.hashes_per_packet)


def classify(packet: CodedPacket, ledger: HashLedger) -> Verdict:
    if packet.kind != Kind.DATA:
        raise ValueError("only precoded data packets are classified by hash")
    if not ledger.covers(packet.id):
        return Verdict.UNKNOWN
    return Verdict.AUTHENTIC if packet.authentic else Verdict.POLLUTED


def adversary_emit(rng, spec: FileSpec) -> CodedPacket:
    """A polluted precoded packet with a uniformly random id."""
    return CodedPacket(Kind.DATA, int(rng.integers(coded_id_space(spec))), False,
                       spec.packet_bytes)


def build_hash_info(payloads, spec: FileSpec, overhead: OverheadConfig = OverheadConfig()) -> list[bytes]:
    """Pack real SHA-1 digests of ``payloads`` into hash-information bodies.

    Only used to check the byte arithmetic: every body plus a signature
    must fit in one packet.
    """
    per, _ = hash_packet_count(spec, overhead)
    digests = [hashlib.sha1(p).digest() for p in payloads]
    if digests and len(digests[0]) != overhead.hash_bytes:
        raise ValueError(f"digest is {len(digests[0])} bytes, expected {overhead.hash_bytes}")
    return [b"".join(digests[i:i + per]) for i in range(0, len(digests), per)]
