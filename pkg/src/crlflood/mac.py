"""Slotted carrier-sense election, range-based reception and erasures.

Also holds the analytic line-network channel: every node forwards one
uniformly chosen packet to its downstream neighbor per slot with no
interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RadioConfig:
    tx_range_m: float = 200.0
    interference_range_m: float = 300.0
    erasure_prob: float = 0.05
    packets_per_slot: int = 20
    slot_seconds: float = 1.0 / 3.0

    def __post_init__(self):
        if not 0.0 <= self.erasure_prob < 1.0:
            raise ValueError(f"erasure probability must lie in [0, 1), got {self.erasure_prob!r}")
        if not 0 < self.tx_range_m <= self.interference_range_m:
            raise ValueError("need 0 < tx_range_m <= interference_range_m")
        if self.packets_per_slot < 1:
            raise ValueError("packets_per_slot must be >= 1")
        if not self.slot_seconds > 0:
            raise ValueError("slot_seconds must be positive")


def elect_transmitters(rng, contenders, positions, cfg: RadioConfig,
                       dist: np.ndarray | None = None) -> list[int]:
    """Greedy random-order independent set under the interference radius.

    ``dist`` may be a precomputed full distance matrix indexed like
    ``positions``; otherwise distances are computed on the fly.
    """
    order = [contenders[i] for i in rng.permutation(len(contenders))]
    elected: list[int] = []
    if dist is None:
        pts = np.asarray(positions, dtype=float)
        for u in order:
            if all(np.hypot(*(pts[u] - pts[e])) > cfg.interference_range_m for e in elected):
                elected.append(u)
        return elected
    blocked = np.zeros(dist.shape[0], dtype=bool)
    near = dist <= cfg.interference_range_m
    for u in order:
        if not blocked[u]:
            elected.append(u)
            blocked |= near[u]
    return elected


def clear_receivers(tx: int, elected, dist: np.ndarray, cfg: RadioConfig) -> np.ndarray:
    """Nodes in range of ``tx`` that hear no other elected transmitter."""
    elected = np.asarray(list(elected), dtype=np.int64)
    heard = (dist[elected] <= cfg.interference_range_m).sum(axis=0)
    ok = (dist[tx] <= cfg.tx_range_m) & (heard == 1)
    ok[tx] = False
    return np.flatnonzero(ok)


def deliver(tx: int, packet, receivers, positions, elected, cfg: RadioConfig, rng) -> set[int]:
    """Receivers that get ``packet`` from ``tx`` in this slot.

    A receiver must be within ``tx_range_m`` of ``tx`` and outside the
    interference range of every other elected node; each survivor then
    passes an independent erasure draw.
    """
    if tx not in elected:
        raise ValueError("transmitter was not elected")
    pts = np.asarray(positions, dtype=float)
    others = [e for e in elected if e != tx]
    got = set()
    for r in receivers:
        if r == tx or r in elected:
            continue
        if np.hypot(*(pts[r] - pts[tx])) > cfg.tx_range_m:
            continue
        if any(np.hypot(*(pts[r] - pts[e])) <= cfg.interference_range_m for e in others):
            continue
        if rng.random() >= cfg.erasure_prob:
            got.add(r)
    return got


def increment_probability(j: int, s: int, eps: float) -> float:
    """Chance that a node holding ``s`` of its upstream's ``j`` packets grows."""
    if j <= 0:
        return 0.0
    return (1.0 - eps) * (j - s) / j


def analytic_mac_step(buffers, eps: float, rng) -> list[int | None]:
    """One slot of the interference-free line channel.

    ``buffers[i]`` is the ordered packet list held by node ``i``. Each node
    with a non-empty buffer sends one uniform choice downstream; the
    returned list gives, per receiving node ``1..d-1``, the id that got
    through or ``None``. Buffers are not modified.
    """
    if len(buffers) < 2:
        raise ValueError("line channel needs at least two nodes")
    out: list[int | None] = []
    for i in range(1, len(buffers)):
        up = buffers[i - 1]
        if len(up) == 0:
            out.append(None)
            continue
        pkt = up[int(rng.integers(len(up)))]
        out.append(pkt if rng.random() >= eps else None)
    return out
