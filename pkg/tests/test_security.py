import os

import numpy as np
import pytest

from crlflood.coding import CodedPacket, FileSpec, Kind
from crlflood.schemes import Protocol, Role, Scheme, SchemeConfig
from crlflood.security import (HashLedger, OverheadConfig, Verdict, adversary_emit,
                               build_hash_info, classify, hash_overhead,
                               hash_packet_count, signed_packet_count)


@pytest.mark.parametrize("k,M,expected", [(1000, 3, (37, 82)), (1000, 4, (37, 109)),
                                          (37, 2, (37, 2))])
def test_hash_packet_count(k, M, expected):
    assert hash_packet_count(FileSpec(k=k, M=M)) == expected


@pytest.mark.parametrize("M,count,pct", [(3, 82, 8), (4, 109, 11), (5, 136, 13)])
def test_hash_overhead_percent(M, count, pct):
    spec = FileSpec(M=M)
    assert hash_packet_count(spec)[1] == count
    assert hash_overhead(spec) == count / 1000
    # the quoted percentages mix rounding and truncation of 27M-ish counts
    near = [100 * c / 1000 for c in (count - 1, count, count + 1)]
    assert any(int(x) == pct or round(x) == pct for x in near)


def test_signed_file_size():
    # 10^6 bytes over 744-byte payloads; 1344 packets hold only 999,936 bytes
    n = signed_packet_count(FileSpec())
    assert n == 1345
    assert abs(n - 1344) <= 1
    assert (n - 1) * 744 < 10**6 <= n * 744


def test_overhead_rejects_oversized_signature():
    with pytest.raises(ValueError):
        hash_packet_count(FileSpec(packet_bytes=300), OverheadConfig(signature_bytes=300))


def test_real_digests_fit_one_packet():
    spec = FileSpec(k=40, M=2)
    payloads = [os.urandom(64) for _ in range(80)]
    bodies = build_hash_info(payloads, spec)
    per, count = hash_packet_count(spec)
    assert len(bodies) == count
    assert all(len(b) + 256 <= spec.packet_bytes for b in bodies)
    assert len(bodies[0]) == per * 20


def test_classify_cases():
    spec = FileSpec()
    full = HashLedger.for_file(spec, complete=True)
    empty = HashLedger.for_file(spec)
    assert classify(CodedPacket(Kind.DATA, 5, True), full) is Verdict.AUTHENTIC
    assert classify(CodedPacket(Kind.DATA, 5, False), full) is Verdict.POLLUTED
    assert classify(CodedPacket(Kind.DATA, 5, True), empty) is Verdict.UNKNOWN


def test_partial_ledger_covers_block():
    led = HashLedger.for_file(FileSpec())
    led.received_hash_packets.add(2)
    assert led.covers(74) and led.covers(110)
    assert not led.covers(73) and not led.covers(111)
    assert list(led.block_ids(2)) == list(range(74, 111))


def test_repair_ids_complete_the_ledger():
    led = HashLedger.for_file(FileSpec())
    led.received_hash_packets |= set(range(1, 82)) | {500}
    assert led.complete
    assert led.covers(0)


def test_adversary_packets_always_polluted():
    rng = np.random.default_rng(3)
    spec = FileSpec()
    full = HashLedger.for_file(spec, complete=True)
    pkts = [adversary_emit(rng, spec) for _ in range(10_000)]
    assert all(classify(p, full) is Verdict.POLLUTED for p in pkts)


def test_malicious_node_emits_polluted():
    proto = Protocol(FileSpec(), SchemeConfig())
    bad = proto.new_node(Role.MALICIOUS)
    rng = np.random.default_rng(0)
    for slot in (1, 50, 500):
        assert proto.wants_to_send(bad, slot, rng)
        assert all(not p.authentic for p in proto.select_burst(bad, slot, rng, 20))


def _line_flow(scheme_cfg, slots, seed=0):
    """Malicious head feeding a 5-node chain of honest relays."""
    proto = Protocol(FileSpec(k=50), scheme_cfg, hash_traffic=False)
    nodes = [proto.new_node(Role.MALICIOUS)] + [proto.new_node(Role.RELAY) for _ in range(4)]
    rng = np.random.default_rng(seed)
    for slot in range(1, slots + 1):
        sent = [proto.select_transmission(n, slot, rng) if proto.wants_to_send(n, slot, rng) else None
                for n in nodes[:-1]]
        for i, p in enumerate(sent):
            if p is not None:
                proto.on_receive(nodes[i + 1], p, slot, from_relay=i > 0)
    return nodes


def test_unverified_pollution_spreads_two_hops():
    nodes = _line_flow(SchemeConfig(verify=False), 50)
    assert nodes[1].tainted and nodes[2].tainted


def test_verified_pollution_never_enters():
    nodes = _line_flow(SchemeConfig(), 50)
    assert all(not n.tainted and not n.pool for n in nodes[1:])
    assert nodes[1].dropped > 0


def test_signed_scheme_drops_forged_rateless():
    proto = Protocol(FileSpec(k=50, M=float("inf")), SchemeConfig(Scheme.SIGN_EVERY_PACKET))
    relay = proto.new_node(Role.RELAY)
    assert not proto.on_receive(relay, CodedPacket(Kind.RATELESS, 9, False), 1)
    assert relay.dropped == 1 and not relay.pool
