"""Slotted simulation loop and its metrics.

Each run owns one ``SeedSequence`` split into named substreams, so the
mobility and placement draws are identical across schemes for the same
seed. Slots are numbered from 1; ``decode_slot`` is the slot during which
a node decoded (sources read 0, never-decoded nodes read -1).
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis.discrete import simulate_chain
from .coding import FileSpec
from .mac import RadioConfig, elect_transmitters
from .schemes import Protocol, Role, Scheme, SchemeConfig, seeding_schedule
from .security import OverheadConfig
from .topology import (build_grid, build_line, grid_source_points, load_road_graph,
                       pairwise_distances, place_vehicles, step_mobility)

STREAMS = ("mobility", "mac", "scheme", "channel", "adversary", "placement")


@dataclass(frozen=True)
class TopologyConfig:
    kind: str = "grid"
    d: int = 31
    spacing_m: float = 150.0
    rows: int = 10
    cols: int = 10
    block_m: float = 450.0
    turn_bias: float = 0.5
    vehicles: int = 236
    sources: int = 4
    road_graph: str | None = None

    def __post_init__(self):
        if self.kind not in ("line", "grid"):
            raise ValueError(f"topology kind must be 'line' or 'grid', got {self.kind!r}")
        if self.kind == "line" and self.d < 2:
            raise ValueError("line topology needs d >= 2")
        if self.kind == "grid":
            if self.vehicles < 1:
                raise ValueError("grid topology needs at least one vehicle")
            if not 1 <= self.sources <= 4:
                raise ValueError("grid topology supports 1 to 4 sources")


@dataclass(frozen=True)
class RunConfig:
    file: FileSpec = FileSpec()
    radio: RadioConfig = RadioConfig()
    scheme: SchemeConfig = SchemeConfig()
    overhead: OverheadConfig = OverheadConfig()
    topology: TopologyConfig = TopologyConfig()
    mac: str = "csma"
    model: str = "packet"
    malicious_fraction: float = 0.05
    horizon_slots: int = 10 ** 6
    stall_slots: int | None = 1500
    seed: int = 0
    record_sizes: bool = False

    def __post_init__(self):
        if self.horizon_slots <= 0:
            raise ValueError("horizon_slots must be positive")
        if not 0.0 <= self.malicious_fraction < 1.0:
            raise ValueError("malicious_fraction must lie in [0, 1)")
        if self.mac not in ("csma", "analytic"):
            raise ValueError(f"mac must be 'csma' or 'analytic', got {self.mac!r}")
        if self.model not in ("packet", "chain"):
            raise ValueError(f"model must be 'packet' or 'chain', got {self.model!r}")
        if self.mac == "analytic" and self.topology.kind != "line":
            raise ValueError("the analytic MAC needs a line topology")
        if self.model == "chain":
            if self.mac != "analytic" or self.malicious_fraction > 0:
                raise ValueError("the chain model needs the analytic MAC and no adversary")
            if self.scheme.scheme not in (Scheme.PRECODE_AND_HASH, Scheme.GENIE_PRECODE):
                raise ValueError("the chain model covers precode-and-hash and genie only")
        if self.stall_slots is not None and self.stall_slots <= 0:
            raise ValueError("stall_slots must be positive")


@dataclass(frozen=True)
class Metrics:
    roles: tuple
    decode_slot: np.ndarray
    corrupt: np.ndarray
    fraction_decoded: np.ndarray
    useful_tx: np.ndarray
    wasted_tx: np.ndarray
    delivered_tx: np.ndarray
    relay_fed: np.ndarray
    slots: int
    slot_seconds: float
    k: int
    T_n: np.ndarray | None = None
    H_next: np.ndarray | None = None
    sizes: np.ndarray | None = None

    @property
    def honest(self) -> np.ndarray:
        return np.array([r == Role.RELAY.value for r in self.roles])

    def decode_times(self) -> np.ndarray:
        """Clean decode slots of honest relays, ``inf`` when they never decoded."""
        t = self.decode_slot[self.honest].astype(float)
        bad = (t < 0) | self.corrupt[self.honest]
        t[bad] = math.inf
        return t

    def median_decode_slot(self) -> float:
        t = np.sort(self.decode_times())
        if t.size == 0:
            return math.inf
        mid = t.size // 2
        return float(t[mid]) if t.size % 2 else 0.5 * (t[mid - 1] + t[mid])

    def final_fraction(self) -> float:
        return float(self.fraction_decoded[-1]) if self.fraction_decoded.size else 0.0

    def relay_decoded(self) -> int:
        """Honest relays that decoded cleanly after receiving data from a relay."""
        ok = self.honest & (self.decode_slot > 0) & ~self.corrupt & self.relay_fed
        return int(ok.sum())

    def normalized_delays(self, eps: float) -> np.ndarray:
        if self.T_n is None:
            raise ValueError("per-hop delays exist only for line topologies")
        t = self.T_n.astype(float)
        t[t < 0] = np.nan
        return (1.0 - eps) * t / self.k

    def write_series_csv(self, path, every: int = 1) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slot", "seconds", "fraction_decoded"])
            w.writerow([0, repr(0.0), repr(0.0)])
            for s in _sample_slots(self.slots, every):
                w.writerow([s, repr(s * self.slot_seconds), repr(float(self.fraction_decoded[s - 1]))])

    def write_nodes_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "decoded_slot", "useful_tx", "wasted_tx"])
            for i in range(len(self.roles)):
                w.writerow([i, int(self.decode_slot[i]), int(self.useful_tx[i]), int(self.wasted_tx[i])])

    def write_line_csv(self, path) -> None:
        if self.T_n is None:
            raise ValueError("per-hop delays exist only for line topologies")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["hop", "T_n_slots", "H_next_fraction"])
            for n, t in enumerate(self.T_n, start=1):
                h = self.H_next[n - 1]
                w.writerow([n, int(t), "" if math.isnan(h) else repr(float(h))])


def _sample_slots(slots: int, every: int) -> list[int]:
    """Every ``every``-th slot, always ending on the last one."""
    out = list(range(every, slots + 1, every))
    if slots and (not out or out[-1] != slots):
        out.append(slots)
    return out


def substreams(seed: int) -> dict:
    root = np.random.SeedSequence(int(seed) & ((1 << 64) - 1))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, root.spawn(len(STREAMS)))}


def run(config: RunConfig) -> Metrics:
    if config.model == "chain":
        return _run_chain(config)
    return _Sim(config).run()


def _run_chain(cfg: RunConfig) -> Metrics:
    rng = substreams(cfg.seed)["channel"]
    d = cfg.topology.d
    res = simulate_chain(cfg.file.k, cfg.file.M, cfg.radio.erasure_prob, d, rng,
                         horizon=cfg.horizon_slots, n_record=d - 1 if cfg.record_sizes else 0)
    roles = (Role.SOURCE.value,) + (Role.RELAY.value,) * (d - 1)
    slots = res.slots
    frac = np.zeros(slots)
    for t in res.decoded_at[1:]:
        if t > 0:
            frac[t - 1:] += 1.0 / (d - 1)
    zeros = np.zeros(d, dtype=np.int64)
    h_next = res.h_next[1:].copy()
    h_next[-1] = np.nan
    return Metrics(roles=roles, decode_slot=res.decoded_at.copy(), corrupt=np.zeros(d, bool),
                   fraction_decoded=frac, useful_tx=zeros, wasted_tx=zeros.copy(),
                   delivered_tx=zeros.copy(), relay_fed=np.ones(d, bool), slots=slots,
                   slot_seconds=cfg.radio.slot_seconds, k=cfg.file.k,
                   T_n=res.decoded_at[1:].copy(), H_next=h_next / (cfg.file.k - 1),
                   sizes=res.sizes)


class _Sim:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.rng = substreams(cfg.seed)
        topo = cfg.topology
        self.line = topo.kind == "line"
        analytic = cfg.mac == "analytic"
        seeding = None if self.line else seeding_schedule(cfg.file, cfg.scheme, cfg.radio.slot_seconds)
        self.proto = Protocol(cfg.file, cfg.scheme, cfg.overhead,
                              packets_per_slot=cfg.radio.packets_per_slot,
                              slot_seconds=cfg.radio.slot_seconds,
                              hash_traffic=not analytic, seeding_slots=seeding)
        if analytic:
            # one packet per slot per node on the analytic channel
            self.proto.source_burst = self.proto.packets_per_slot = 1
        if self.line:
            self.n_src = 1
            n_relays = topo.d - 1
            self.graph = self.fleet = None
            self.positions = build_line(topo.d, topo.spacing_m).positions()
        else:
            self.n_src = topo.sources
            n_relays = topo.vehicles
            if topo.road_graph:
                self.graph = load_road_graph(topo.road_graph)
                lo, hi = self.graph.tail.min(0), self.graph.tail.max(0)
                src = lo + (hi - lo) * np.array([[.25, .25], [.75, .25], [.25, .75], [.75, .75]])
            else:
                self.graph = build_grid(topo.rows, topo.cols, topo.block_m, topo.turn_bias)
                src = grid_source_points(topo.rows, topo.cols, topo.block_m)
            self.fleet = place_vehicles(self.graph, n_relays, self.rng["placement"])
            self.positions = np.vstack([src[:self.n_src], self.fleet.positions(self.graph)])
        n_bad = int(round(cfg.malicious_fraction * n_relays))
        bad = set((self.rng["adversary"].choice(n_relays, size=n_bad, replace=False)
                   + self.n_src).tolist()) if n_bad else set()
        self.nodes = []
        for i in range(self.n_src + n_relays):
            role = Role.SOURCE if i < self.n_src else (Role.MALICIOUS if i in bad else Role.RELAY)
            self.nodes.append(self.proto.new_node(role))
        self.n = len(self.nodes)
        self.delivered = np.zeros(self.n, dtype=np.int64)
        self.honest_ids = [i for i, nd in enumerate(self.nodes) if nd.role is Role.RELAY]
        self.mk = cfg.file.M * cfg.file.k if not cfg.file.rateless else math.inf

    def run(self) -> Metrics:
        cfg = self.cfg
        proto, nodes = self.proto, self.nodes
        honest_total = len(self.honest_ids)
        pending = set(self.honest_ids)
        clean = 0
        frac = []
        sizes = [] if cfg.record_sizes and self.line else None
        T_n = np.full(self.n - 1, -1, dtype=np.int64) if self.line else None
        H_next = np.full(self.n - 1, np.nan) if self.line else None
        last_progress = proto.seeding_slots or 0
        stall = cfg.stall_slots is not None and proto.seeding_slots is not None
        dist = pairwise_distances(self.positions) if self.fleet is None else None
        slot = 0
        while slot < cfg.horizon_slots and pending:
            slot += 1
            if self.fleet is not None:
                step_mobility(self.fleet, self.graph, cfg.radio.slot_seconds, self.rng["mobility"])
                self.positions[self.n_src:] = self.fleet.positions(self.graph)
                dist = pairwise_distances(self.positions)
            if cfg.mac == "analytic":
                touched = self._analytic_slot(slot)
            else:
                touched = self._csma_slot(slot, dist)
            for i in touched:
                nd = nodes[i]
                if i in pending and nd.decode.decoded:
                    pending.discard(i)
                    if not nd.corrupt:
                        clean += 1
                    last_progress = max(last_progress, slot)
                    if self.line:
                        T_n[i - 1] = slot
                        if i + 1 < self.n:
                            H_next[i - 1] = nodes[i + 1].held / (cfg.file.k - 1)
            frac.append(clean / honest_total if honest_total else 1.0)
            if sizes is not None:
                sizes.append([self.mk if nd.decode.decoded else nd.held for nd in nodes[1:]])
            # with finite seeding, give up once no honest relay has decoded for a while
            if stall and slot - last_progress >= cfg.stall_slots:
                break
        return Metrics(
            roles=tuple(nd.role.value for nd in nodes),
            decode_slot=np.array([-1 if nd.decoded_at_slot is None else nd.decoded_at_slot
                                  for nd in nodes], dtype=np.int64),
            corrupt=np.array([nd.corrupt for nd in nodes]),
            fraction_decoded=np.array(frac),
            useful_tx=np.array([nd.useful_tx for nd in nodes], dtype=np.int64),
            wasted_tx=np.array([nd.wasted_tx for nd in nodes], dtype=np.int64),
            delivered_tx=self.delivered.copy(),
            relay_fed=np.array([nd.relay_fed for nd in nodes]),
            slots=slot, slot_seconds=cfg.radio.slot_seconds, k=cfg.file.k,
            T_n=T_n, H_next=H_next,
            sizes=None if sizes is None else np.vstack([np.zeros((1, self.n - 1))] + [np.array(sizes)]),
        )

    def _account(self, sender: int, delivered: int, useful: int) -> None:
        nd = self.nodes[sender]
        self.delivered[sender] += delivered
        nd.useful_tx += useful
        nd.wasted_tx += delivered - useful

    def _analytic_slot(self, slot: int) -> list[int]:
        proto, nodes = self.proto, self.nodes
        rs, rc = self.rng["scheme"], self.rng["channel"]
        eps = self.cfg.radio.erasure_prob
        sent = []
        for i in range(self.n - 1):
            nd = nodes[i]
            pkt = proto.select_transmission(nd, slot, rs) if proto.wants_to_send(nd, slot, rs) else None
            sent.append(pkt)
        touched = []
        for i, pkt in enumerate(sent):
            if pkt is None or rc.random() < eps:
                continue
            useful = proto.on_receive(nodes[i + 1], pkt, slot, nodes[i].role is Role.RELAY)
            self._account(i, 1, int(useful))
            touched.append(i + 1)
        return touched

    def _csma_slot(self, slot: int, dist: np.ndarray) -> list[int]:
        proto, nodes, radio = self.proto, self.nodes, self.cfg.radio
        rs = self.rng["scheme"]
        contenders = [i for i, nd in enumerate(nodes) if proto.wants_to_send(nd, slot, rs)]
        if not contenders:
            return []
        elected = elect_transmitters(self.rng["mac"], contenders, None, radio, dist)
        heard = (dist[elected] <= radio.interference_range_m).sum(axis=0)
        in_range = dist[elected] <= radio.tx_range_m
        batches = []
        for row, e in enumerate(elected):
            nd = nodes[e]
            pkts = proto.select_burst(nd, slot, rs, proto.burst(nd))
            rx = np.flatnonzero(in_range[row] & (heard == 1))
            rx = rx[rx != e]
            if pkts and rx.size:
                ok = self.rng["channel"].random((rx.size, len(pkts))) >= radio.erasure_prob
                batches.append((e, rx, pkts, ok))
        touched = set()
        for e, rx, pkts, ok in batches:
            from_relay = nodes[e].role is Role.RELAY
            got = ok.sum(axis=1).tolist()
            for r, row, n_got in zip(rx.tolist(), ok.tolist(), got):
                useful = proto.receive_burst(nodes[r], pkts, row, slot, from_relay)
                self._account(e, n_got, useful)
                touched.add(r)
        return sorted(touched)


@dataclass(frozen=True)
class SweepResult:
    config: RunConfig
    runs: list
    mean_decode_slot: np.ndarray
    std_decode_slot: np.ndarray


def _summarize(cfg: RunConfig, runs: list) -> SweepResult:
    t = np.array([m.decode_slot for m in runs], dtype=float)
    t[t < 0] = np.nan
    with warnings.catch_warnings():
        # nodes that never decode in any replication give all-NaN columns
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(t, axis=0) if len(runs) else np.array([])
        std = np.nanstd(t, axis=0, ddof=1) if len(runs) > 1 else np.zeros_like(mean)
    return SweepResult(cfg, runs, mean, std)


def sweep(configs, replication: int = 1, workers: int = 1) -> list[SweepResult]:
    """Run each config with seeds ``seed + 0 .. seed + replication - 1``."""
    if replication < 1:
        raise ValueError("replication must be >= 1")
    jobs = [replace(c, seed=c.seed + r) for c in configs for r in range(replication)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(run, jobs))
    else:
        out = [run(j) for j in jobs]
    return [_summarize(c, out[i * replication:(i + 1) * replication])
            for i, c in enumerate(configs)]
