"""Per-node behaviour of the five distribution schemes.

A :class:`Protocol` instance holds everything that is fixed for a run
(file, scheme knobs, hash bookkeeping, the shared rateless id stream) and
mutates :class:`NodeState` objects on transmission and reception.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .coding import (CodedPacket, DecodeState, FileSpec, FreshIds, Kind,
                     coded_id_space)
from .security import (HashLedger, OverheadConfig, hash_packet_count,
                       signed_packet_count)


class Scheme(enum.Enum):
    PRECODE_AND_HASH = "precode-and-hash"
    WAIT_TO_DECODE = "wait-to-decode"
    SIGN_EVERY_PACKET = "sign-every-packet"
    GENIE_PRECODE = "genie-precode"
    PROPORTIONAL = "proportional"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        key = text.strip().lower().replace("_", "-")
        for s in cls:
            if key in (s.value, s.name.lower().replace("_", "-")):
                return s
        raise ValueError(f"unknown scheme {text!r}")

    @property
    def hashed(self) -> bool:
        return self in (Scheme.PRECODE_AND_HASH, Scheme.PROPORTIONAL)


class Role(enum.Enum):
    SOURCE = "source"
    RELAY = "relay"
    MALICIOUS = "malicious"


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme = Scheme.PRECODE_AND_HASH
    hash_first_slots: int | None = None
    hash_forward_prob: float = 0.2
    seed_multiplier: float = 5.0
    seeding_rate_pps: float = 60.0
    verify: bool = True
    quarantine_capacity: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.hash_forward_prob <= 1.0:
            raise ValueError("hash_forward_prob must lie in [0, 1]")
        if not self.seed_multiplier > 0:
            raise ValueError("seed_multiplier must be positive")
        if not self.seeding_rate_pps > 0:
            raise ValueError("seeding_rate_pps must be positive")
        if self.hash_first_slots is not None and self.hash_first_slots < 0:
            raise ValueError("hash_first_slots must be >= 0")
        if self.quarantine_capacity is not None and self.quarantine_capacity < 0:
            raise ValueError("quarantine_capacity must be >= 0")


@dataclass
class NodeState:
    role: Role
    decode: DecodeState = field(default_factory=DecodeState)
    ledger: HashLedger | None = None
    # unknown packets keyed by covering hash block: block -> [(id, authentic)]
    quarantine: dict = field(default_factory=dict)
    quarantined: int = 0
    decoded_at_slot: int | None = None
    wasted_tx: int = 0
    useful_tx: int = 0
    dropped: int = 0
    # sendable data as (id, authentic) in arrival order, for O(1) sampling
    pool: list = field(default_factory=list)
    hash_pool: list = field(default_factory=list)
    staged: dict = field(default_factory=dict)
    tainted: set = field(default_factory=set)
    corrupt: bool = False
    relay_fed: bool = False
    hash_cursor: int = 0
    next_kind: Kind | None = None

    @property
    def honest(self) -> bool:
        return self.role is not Role.MALICIOUS

    @property
    def held(self) -> int:
        """Packets counting toward decode (staged ones for Wait-to-Decode)."""
        return max(len(self.decode.received) + len(self.tainted), len(self.staged))


def seeding_schedule(spec: FileSpec, cfg: SchemeConfig, slot_seconds: float | None = None):
    """Seeding window in seconds, or in slots (ceiling) when ``slot_seconds`` is given."""
    seconds = cfg.seed_multiplier * spec.k / cfg.seeding_rate_pps
    if slot_seconds is None:
        return seconds
    return math.ceil(seconds / slot_seconds - 1e-9)


class Protocol:
    """Scheme rules bound to one run.

    ``hash_traffic=False`` preloads every ledger and suppresses
    hash-information packets; the analytic line channel uses this so that
    only data packets flow. ``seeding_slots=None`` lets sources transmit
    for the whole run. Slots are numbered from 1, so the hash phase is
    slots ``1..hash_first_slots`` and seeding covers ``1..seeding_slots``.
    """

    def __init__(self, spec: FileSpec, cfg: SchemeConfig,
                 overhead: OverheadConfig = OverheadConfig(), *,
                 packets_per_slot: int = 20, slot_seconds: float = 1.0 / 3.0,
                 hash_traffic: bool = True, seeding_slots: int | None = None):
        self.spec = spec
        self.cfg = cfg
        self.scheme = cfg.scheme
        self.overhead = overhead
        self.packets_per_slot = packets_per_slot
        self.source_burst = max(1, int(round(cfg.seeding_rate_pps * slot_seconds)))
        self.seeding_slots = seeding_slots
        self.fresh = FreshIds()
        self.threshold = spec.k
        if self.scheme is Scheme.SIGN_EVERY_PACKET:
            self.threshold = signed_packet_count(spec, overhead)
        self._hashed = self.scheme.hashed
        self.hash_traffic = hash_traffic and self._hashed
        if self._hashed:
            if spec.rateless:
                raise ValueError(f"{self.scheme.value} needs a finite precode rate")
            self.id_space = coded_id_space(spec)
            self.hashes_per_packet, self.hash_count = hash_packet_count(spec, overhead)
            self.fresh_hash = FreshIds(self.hash_count)
        else:
            self.id_space = None
            self.hashes_per_packet, self.hash_count = 1, 0
        if not self.hash_traffic:
            self.hash_first_slots = 0
        elif cfg.hash_first_slots is not None:
            self.hash_first_slots = cfg.hash_first_slots
        else:
            self.hash_first_slots = math.ceil(self.hash_count / packets_per_slot)

    def new_node(self, role: Role) -> NodeState:
        node = NodeState(role)
        if self._hashed:
            node.ledger = HashLedger(self.hash_count, self.hashes_per_packet)
            if not self.hash_traffic or role is Role.SOURCE:
                node.ledger.received_hash_packets = set(range(self.hash_count))
                node.hash_pool = list(range(self.hash_count))
        if role is Role.SOURCE:
            node.decode.decoded = True
            node.decoded_at_slot = 0
        return node

    def burst(self, node: NodeState) -> int:
        return self.source_burst if node.role is Role.SOURCE else self.packets_per_slot

    def seeding(self, slot: int) -> bool:
        return self.seeding_slots is None or slot <= self.seeding_slots

    # ---- transmit side -------------------------------------------------

    def wants_to_send(self, node: NodeState, slot: int, rng) -> bool:
        """Whether ``node`` contends for the channel in ``slot``.

        Coins that gate transmission are tossed here, before the election:
        the buffer-proportional coin of proportional forwarding and the
        per-slot hash-or-data choice of the hashed schemes. A node whose
        chosen kind is unavailable stays silent.
        """
        role = node.role
        if role is Role.MALICIOUS:
            return True
        if role is Role.SOURCE and not self.seeding(slot):
            return False
        scheme = self.scheme
        decoded = node.decode.decoded
        if role is Role.RELAY and not decoded:
            if scheme is Scheme.WAIT_TO_DECODE:
                return False
            if scheme is Scheme.PROPORTIONAL and not rng.random() < min(1.0, len(node.pool) / self.spec.k):
                return False
        if not self._hashed:
            return role is Role.SOURCE or decoded or bool(node.pool)
        node.next_kind = self._draw_kind(slot, rng)
        return self._has_kind(node, node.next_kind)

    def _draw_kind(self, slot, rng) -> Kind:
        if not self.hash_traffic:
            return Kind.DATA
        if slot <= self.hash_first_slots:
            return Kind.HASH
        return Kind.HASH if rng.random() < self.cfg.hash_forward_prob else Kind.DATA

    def _has_kind(self, node, kind) -> bool:
        if kind == Kind.HASH:
            return node.role is Role.SOURCE or bool(node.hash_pool)
        return node.role is Role.SOURCE or node.decode.decoded or bool(node.pool)

    def select_transmission(self, node: NodeState, slot: int, rng) -> CodedPacket | None:
        """One packet for an elected ``node``, or ``None`` if it has nothing."""
        burst = self.select_burst(node, slot, rng, 1)
        return burst[0] if burst else None

    def select_burst(self, node: NodeState, slot: int, rng, count: int) -> list[CodedPacket]:
        """``count`` independent selections for one elected slot, in one batch."""
        size = self.spec.packet_bytes
        if node.role is Role.MALICIOUS:
            if self.id_space is not None:
                ids = rng.integers(self.id_space, size=count).tolist()
                return [CodedPacket(Kind.DATA, i, False, size) for i in ids]
            return [CodedPacket(Kind.RATELESS, self.fresh(), False, size) for _ in range(count)]
        scheme = self.scheme
        if self._hashed:
            return self._precode_burst(node, slot, rng, count, size)
        if node.role is Role.SOURCE or (node.decode.decoded and scheme is not Scheme.SIGN_EVERY_PACKET):
            ok = not node.corrupt
            return [CodedPacket(Kind.RATELESS, self.fresh(), ok, size) for _ in range(count)]
        if scheme is Scheme.WAIT_TO_DECODE or not node.pool:
            return []
        pool = node.pool
        return [CodedPacket(Kind.RATELESS, *pool[i], size)
                for i in rng.integers(len(pool), size=count).tolist()]

    def _precode_burst(self, node, slot, rng, count, size):
        kind = node.next_kind
        node.next_kind = None
        if kind is None:
            kind = self._draw_kind(slot, rng)
        if not self._has_kind(node, kind):
            return []
        if kind == Kind.HASH:
            if node.role is Role.SOURCE:
                return [CodedPacket(Kind.HASH, self._source_hash_id(node), True, size)
                        for _ in range(count)]
            hp = node.hash_pool
            return [CodedPacket(Kind.HASH, hp[i], True, size)
                    for i in rng.integers(len(hp), size=count).tolist()]
        if node.role is Role.SOURCE or node.decode.decoded:
            ok = not node.corrupt
            return [CodedPacket(Kind.DATA, i, ok, size)
                    for i in rng.integers(self.id_space, size=count).tolist()]
        pool = node.pool
        return [CodedPacket(Kind.DATA, *pool[i], size)
                for i in rng.integers(len(pool), size=count).tolist()]

    def _source_hash_id(self, node) -> int:
        # systematic hash packets once, in order, then fresh repair packets
        if node.hash_cursor < self.hash_count:
            node.hash_cursor += 1
            return node.hash_cursor - 1
        return self.fresh_hash()

    # ---- receive side --------------------------------------------------

    def on_receive(self, node: NodeState, packet: CodedPacket, slot: int,
                   from_relay: bool = False) -> bool:
        """Apply one delivered packet; True when it added information."""
        if node.role is not Role.RELAY:
            return False
        if packet.kind == Kind.HASH:
            return self._take_hash(node, packet.id, slot)
        if node.decode.decoded:
            return False
        scheme = self.scheme
        if scheme is Scheme.WAIT_TO_DECODE:
            useful = self._stage(node, packet, slot)
        elif self._hashed and self.cfg.verify:
            useful = self._verified_data(node, packet)
        elif self._hashed:
            useful = self._unverified_data(node, packet)
        else:
            # signatures (or the genie) reveal pollution on arrival
            if not packet.authentic:
                node.dropped += 1
                return False
            useful = self._accept(node, packet.id, True)
        if useful:
            if from_relay:
                node.relay_fed = True
            self._check_decode(node, slot)
        return useful

    def receive_burst(self, node: NodeState, packets, delivered, slot: int,
                      from_relay: bool = False) -> int:
        """Apply the packets of one burst whose ``delivered`` flag is set.

        Returns how many of the delivered packets were useful.
        """
        if node.role is not Role.RELAY:
            return 0
        if node.decode.decoded and (node.ledger is None or node.ledger.complete):
            return 0
        useful = 0
        for p, ok in zip(packets, delivered):
            if ok and self.on_receive(node, p, slot, from_relay):
                useful += 1
        return useful

    def _accept(self, node, pid, authentic) -> bool:
        store = node.decode.received if authentic else node.tainted
        if pid in node.decode.received or pid in node.tainted:
            return False
        store.add(pid)
        node.pool.append((pid, authentic))
        return True

    def _take_hash(self, node, hid, slot) -> bool:
        ledger = node.ledger
        if ledger is None or hid in ledger.received_hash_packets:
            return False
        was_complete = ledger.complete
        ledger.received_hash_packets.add(hid)
        node.hash_pool.append(hid)
        if ledger.complete and not was_complete:
            blocks = list(node.quarantine)
        elif hid < ledger.total_hash_packets:
            blocks = [hid]
        else:
            blocks = []
        released = False
        for b in blocks:
            held = node.quarantine.pop(b, None)
            if not held:
                continue
            released = True
            node.quarantined -= len(held)
            for pid, auth in held:
                if auth:
                    self._accept(node, pid, True)
                else:
                    node.dropped += 1
        if released:
            self._check_decode(node, slot)
        return True

    def _verified_data(self, node, packet) -> bool:
        ledger = node.ledger
        pid = packet.id
        if ledger.covers(pid):
            if not packet.authentic:
                node.dropped += 1
                return False
            return self._accept(node, pid, True)
        if pid in node.decode.received:
            return False
        cap = self.cfg.quarantine_capacity
        if cap is not None and node.quarantined >= cap:
            node.dropped += 1
            return False
        bucket = node.quarantine.setdefault(pid // ledger.hashes_per_packet, [])
        entry = (pid, packet.authentic)
        if entry in bucket:
            return False
        bucket.append(entry)
        node.quarantined += 1
        return True

    def _unverified_data(self, node, packet) -> bool:
        return self._accept(node, packet.id, packet.authentic)

    def _stage(self, node, packet, slot) -> bool:
        if packet.id in node.staged:
            return False
        node.staged[packet.id] = packet.authentic
        return True

    def _check_decode(self, node, slot) -> None:
        if node.decode.decoded:
            return
        if self.scheme is Scheme.WAIT_TO_DECODE:
            if len(node.staged) < self.threshold:
                return
            if all(node.staged.values()):
                node.decode.received.update(node.staged)
                node.staged.clear()
                self._mark_decoded(node, slot)
            else:
                # whole-file signature fails; nothing staged can be trusted
                node.dropped += len(node.staged)
                node.staged.clear()
            return
        if len(node.decode.received) + len(node.tainted) >= self.threshold:
            node.corrupt = bool(node.tainted)
            self._mark_decoded(node, slot)

    def _mark_decoded(self, node, slot) -> None:
        node.decode.decoded = True
        node.decoded_at_slot = slot

    def clean_decode(self, node: NodeState) -> bool:
        return node.decode.decoded and not node.corrupt
