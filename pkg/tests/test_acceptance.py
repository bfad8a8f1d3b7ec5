"""Acceptance checks, one printed PASS/FAIL line per check.

Run under pytest (lines appear in the terminal summary) or directly:

    python3 tests/test_acceptance.py
"""

from __future__ import annotations

import functools
import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from crlflood.analysis import (discrete_vs_fluid, fixed_point_profile, fluid_integrate, h_star,
                               monotonicity_check, proportional_fluid_integrate,
                               simulate_chain, solve_TF, theorem1_bound)
from crlflood.coding import FileSpec
from crlflood.engine import RunConfig, TopologyConfig, run
from crlflood.mac import RadioConfig
from crlflood.schemes import Scheme, SchemeConfig
from crlflood.security import hash_packet_count, signed_packet_count

INF = math.inf
RESULTS: list[str] = []


def record(tag: str, ok: bool, detail: str) -> bool:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {tag:4s} {detail}")
    return ok


# ---- 1-2: fixed points -------------------------------------------------

def check_1():
    times = []
    for _ in range(50):
        t0 = time.perf_counter()
        x, _ = solve_TF(INF)
        times.append(time.perf_counter() - t0)
    err = abs(x - math.exp(-1))
    best = min(times) * 1e3
    return [("1", err <= 1e-9 and best < 1.0,
             f"T^F(inf) = {x:.12f}, |err| = {err:.1e} (<= 1e-9), {best:.3f} ms (< 1 ms)")]


def check_2():
    Ms = [2, 3, 6, INF]
    resid, lower, head, rec = [], [], [], []
    for M in Ms:
        _, h = solve_TF(M)
        resid.append(abs(-math.log(h) - 1 + (0 if math.isinf(M) else h / M)))
        lower.append(h - (math.exp(-1) if math.isinf(M) else M / (M * math.e - 1)))
        fp = fixed_point_profile(M)
        head.append(abs(fp.h0[0] - (math.e - 1) * fp.h_inf))
        r = {i: h_star(i, M) / h_star(i - 1, M) for i in range(1, 51)}
        rec.append({i: abs(r[i] - 1 / (2 - r[i - 1])) for i in range(2, 51)})
    out = [
        ("2a", max(resid) <= 1e-9, f"tail residual max {max(resid):.1e} (<= 1e-9)"),
        ("2b", min(lower) >= 0, f"tail minus M/(Me-1), min {min(lower):.2e} (>= 0)"),
        ("2c", max(head) <= 1e-8, "|h_1 - (e-1) h_inf| by M: "
         + ", ".join(f"{'inf' if math.isinf(M) else M}:{d:.1e}" for M, d in zip(Ms, head))
         + " (<= 1e-8)"),
    ]
    worst = max(max(d.values()) for d in rec)
    bad_i = sorted({i for d in rec for i, v in d.items() if v > 1e-12})
    later = max(v for d in rec for i, v in d.items() if i >= 3)
    out.append(("2d", worst <= 1e-12,
                f"r* recurrence i=2..50: max err {worst:.1e} (<= 1e-12); "
                f"fails at i={bad_i}, i=3..50 max err {later:.1e}"))
    return out


# ---- 3-5: line network --------------------------------------------------

def one_hop_config(seed):
    return RunConfig(file=FileSpec(k=5000, M=3), radio=RadioConfig(erasure_prob=0.05),
                     topology=TopologyConfig(kind="line", d=2), mac="analytic",
                     malicious_fraction=0.0, seed=seed)


def check_3():
    t0 = time.perf_counter()
    vals = [run(one_hop_config(s)).normalized_delays(0.05)[0] for s in range(20)]
    elapsed = time.perf_counter() - t0
    mean = float(np.mean(vals))
    target = 3 * math.log(1.5)
    rel = abs(mean - target) / target
    return [("3", rel <= 0.02, f"mean (1-eps)T_1/k = {mean:.5f} vs {target:.5f}, "
             f"rel err {rel:.2%} (<= 2%), packet engine, {elapsed:.1f} s")]


@functools.lru_cache(maxsize=None)
def thirty_hop_runs():
    return [simulate_chain(2000, 3, 0.05, 31, np.random.default_rng(seed)) for seed in range(10)]


def check_4():
    runs = thirty_hop_runs()
    bound = np.array([theorem1_bound(n, 3) for n in range(1, 31)])
    ok = np.concatenate([r.normalized_delays() <= bound for r in runs])
    share = ok.mean()
    return [("4", share >= 0.95, f"(1-eps)T_n/k <= bound in {share:.1%} of {ok.size} "
             f"(seed, n) pairs (>= 95%)")]


def check_5():
    runs = thirty_hop_runs()
    frac = np.concatenate([r.half_buffer_fractions()[1:] for r in runs])  # n >= 2
    share = (frac >= 0.5).mean()
    return [("5", share >= 0.95, f"|H_n+1(T_n)|/(k-1) >= 0.5 in {share:.1%} of {frac.size} "
             f"samples, min {frac.min():.3f} (>= 95%)")]


# ---- 6-8: fluid limit ---------------------------------------------------

def check_6():
    out = []
    for tag, M in (("6a", INF), ("6b", 3)):
        T = fluid_integrate(M, 301, 1e4, 1e-4, max_rounds=300).round_times()
        target = solve_TF(M)[0]
        mono = len(T) == 300 and bool(np.all(np.diff(T) < 0))
        gap = abs(T[-1] - target)
        name = "inf" if math.isinf(M) else str(M)
        out.append((tag, mono and gap <= 1e-3,
                    f"M={name}: T^[k] decreasing {mono}, T^[300] = {T[-1]:.6f}, "
                    f"gap to {target:.6f} is {gap:.1e} (<= 1e-3)"))
    return out


def check_7():
    traj = fluid_integrate(INF, 5, 1.0, 1e-4, record_every=1)
    before = traj.t < 1.0 - 1e-9
    err = np.abs(traj.h[before] - traj.t[before, None] / np.arange(1, 6)).max()
    return [("7", err <= 1e-6, f"round-1 profile vs t/i, i <= 5: max err {err:.1e} (<= 1e-6)")]


def check_8():
    dev = discrete_vs_fluid(3, 0.0, 10_000, 5, rng=0)
    return [("8", dev <= 0.05, f"chain vs fluid, M=3 k=1e4 i<=5: max dev {dev:.4f} (<= 0.05)")]


# ---- 9: overhead arithmetic ---------------------------------------------

def check_9():
    per, _ = hash_packet_count(FileSpec(M=3))
    signed = signed_packet_count(FileSpec())
    quoted = {3: 8, 4: 11, 5: 13}
    pct_ok, parts = True, []
    for M, pct in quoted.items():
        count = hash_packet_count(FileSpec(M=M))[1]
        near = [100 * c / 1000 for c in (count - 1, count, count + 1)]
        hit = any(int(x) == pct or round(x) == pct for x in near)
        pct_ok &= hit
        parts.append(f"M={M}:{count} pkts {100 * count / 1000:.1f}%")
    ok = per == 37 and abs(signed - 1344) <= 1 and pct_ok
    return [("9", ok, f"{per} hashes/pkt, signed file {signed} pkts (1344 +-1), "
             + ", ".join(parts) + " (8/11/13% within +-1 pkt)")]


# ---- 10-11: urban scenario ----------------------------------------------

URBAN_HORIZON = 4000


def urban(scheme, seed=0, mult=5.0, **kw):
    return RunConfig(scheme=SchemeConfig(scheme, seed_multiplier=mult, **kw), seed=seed,
                     horizon_slots=URBAN_HORIZON)


@functools.lru_cache(maxsize=None)
def urban_run(scheme, seed=0, mult=5.0, verify=True, stall=True):
    cfg = urban(scheme, seed, mult, verify=verify)
    if not stall:
        cfg = replace(cfg, stall_slots=None)
    return run(cfg)


def check_10():
    pah = urban_run(Scheme.PRECODE_AND_HASH, stall=False)
    abl = urban_run(Scheme.PRECODE_AND_HASH, verify=False, stall=False)
    a, b = pah.final_fraction(), abl.final_fraction()
    return [("10a", a == 1.0, f"precode-and-hash honest decoded {a:.3f} within "
             f"{pah.slots} of {URBAN_HORIZON} slots (== 1)"),
            ("10b", b < 0.5, f"unverified ablation honest decoded {b:.3f} at "
             f"{abl.slots} slots (< 0.5)")]


def check_11():
    med = {s: urban_run(s).median_decode_slot() for s in Scheme}
    g = med[Scheme.GENIE_PRECODE]
    p = med[Scheme.PRECODE_AND_HASH]
    sep, wtd = med[Scheme.SIGN_EVERY_PACKET], med[Scheme.WAIT_TO_DECODE]
    listing = ", ".join(f"{s.value} {v:g}" for s, v in med.items())
    out = [
        ("11a", g <= p <= sep, f"genie <= pah <= sign-every-packet; medians: {listing}"),
        ("11b", p <= wtd, f"pah {p:g} <= wait-to-decode {wtd:g}"),
        ("11c", 1.0 <= p / g <= 1.5, f"pah / genie = {p / g:.3f} in [1.0, 1.5]"),
    ]
    seeds = range(4)
    spread = [urban_run(Scheme.WAIT_TO_DECODE, seed=s, mult=2.0).relay_decoded() for s in seeds]
    silent = sum(v == 0 for v in spread)
    out.append(("11d", silent >= len(spread) / 2,
                f"seeding x2: wait-to-decode relay-fed decodes per seed {spread}, "
                f"zero in {silent}/{len(spread)} (>= half)"))
    p2 = urban_run(Scheme.PRECODE_AND_HASH, mult=2.0).median_decode_slot()
    out.append(("11e", p2 <= 1.25 * p, f"pah median x2 seeding {p2:g} vs x5 {p:g}, "
                f"ratio {p2 / p:.3f} (<= 1.25)"))
    return out


# ---- 12-13 --------------------------------------------------------------

def check_12():
    traj = proportional_fluid_integrate(301, 1e4, 1e-4, max_rounds=300)
    T = traj.round_times()
    avg = float(T.mean())
    lo, hi = 2 - math.sqrt(2) - 0.01, 0.6 + 0.01
    return [("12", len(T) == 300 and lo <= avg <= hi and traj.max_ratio <= 0.5 + 1e-12,
             f"mean T^[k] over {len(T)} rounds {avg:.5f} in [{lo:.5f}, {hi:.2f}], "
             f"max r_i {traj.max_ratio:.9f} (<= 1/2)")]


def check_13():
    rng = np.random.default_rng(2024)
    ordered, worst = 0, 0.0
    for trial in range(100):
        M = (2.0, 3.0, INF)[trial % 3]
        n = int(rng.integers(3, 9))
        b = np.sort(rng.uniform(0.0, 0.7, n))[::-1]
        a = np.sort(np.minimum(b + rng.uniform(0.0, 0.3, n), 0.99))[::-1]
        rep = monotonicity_check(M, a, b, 4.0, 1e-3)
        ordered += bool(rep)
        worst = max(worst, rep.max_violation)
    return [("13", ordered == 100, f"{ordered}/100 random ordered pairs stay ordered, "
             f"max breach {worst:.1e}")]


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8,
          check_9, check_10, check_11, check_12, check_13]


@pytest.mark.slow
@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i}" for i in range(1, 14)])
def test_acceptance(check):
    results = check()
    failed = [tag for tag, ok, detail in results if not record(tag, ok, detail)]
    assert not failed, f"failed: {failed}"


if __name__ == "__main__":
    for check in CHECKS:
        for tag, ok, detail in check():
            record(tag, ok, detail)
            print(RESULTS[-1], flush=True)
    sys.exit(0 if all(line.startswith("[PASS]") for line in RESULTS) else 1)
