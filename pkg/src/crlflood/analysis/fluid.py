"""Fluid-limit integration of the relay chain with renewal rounds.

Node ``i`` (1-based) holds a buffer fraction ``h_i``. The first undecoded
node is fed by a full source (fullness ``M``); every other node is fed by
its undecoded predecessor. When a node reaches 1 it decodes, snaps to
``M`` and the next node becomes the head of the chain. The interval
between two such decode events is one renewal round.

Arrays use absolute node indexing: column ``i - 1`` of a trajectory is
node ``i`` for the whole run, decoded or not.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels

INF = math.inf

_BOOT_TIME = 1e-12
_STIFF = 0.2


class FluidStepError(RuntimeError):
    """The step size is too coarse to resolve a decode crossing."""


@dataclass
class FluidState:
    h: np.ndarray
    t: float
    crossings: list[float]
    M: float

    @property
    def first(self) -> int:
        """0-based index of the head of the undecoded chain."""
        return len(self.crossings)


@dataclass
class FluidTrajectory:
    t: np.ndarray
    h: np.ndarray
    crossings: np.ndarray
    final: FluidState
    max_ratio: float = field(default=float("nan"))

    def round_times(self) -> np.ndarray:
        """Durations ``T^[k]`` of the completed rounds."""
        return np.diff(np.concatenate([[0.0], self.crossings]))

    def write_csv(self, path, nodes: int | None = None) -> None:
        n = self.h.shape[1] if nodes is None else min(nodes, self.h.shape[1])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"h_{i}" for i in range(1, n + 1)])
            for t, row in zip(self.t, self.h[:, :n]):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def _inv(M: float) -> float:
    return 0.0 if math.isinf(M) else 1.0 / M


def _check_initial(h0, M: float) -> np.ndarray:
    h = np.array(h0, dtype=np.float64)
    if h.ndim != 1 or h.size == 0:
        raise ValueError("initial profile must be a non-empty vector")
    if np.any(h < 0) or np.any(h >= 1):
        raise ValueError("initial buffer fractions must lie in [0, 1)")
    if np.any(np.diff(h) > 0):
        raise ValueError("initial profile must be non-increasing in the node index")
    if not (M > 1):
        raise ValueError("M must exceed 1")
    return h


def _bootstrap(h: np.ndarray, M: float, t_b: float) -> None:
    """Step past the 0/0 singularity of a zero tail to time ``t_b``.

    A zero run starting at node m behind a positive predecessor grows to
    leading order as ``h_{m+j}(t) = t / (j + 1)``; nodes ahead of the run
    take one Euler step. Errors are O(t_b**2).
    """
    zeros = np.flatnonzero(h == 0.0)
    if zeros.size == 0:
        return
    m = zeros[0]
    head = h[:m].copy()
    if m > 0:
        prev = np.concatenate([[M], head[:-1]])
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = 1.0 - np.where(np.isinf(prev), 0.0, head / prev)
        h[:m] = head + t_b * rate
    h[m:] = t_b / np.arange(1, h.size - m + 1)


def _run(system, h0, M, t_end, dt, max_rounds, record_every, max_samples,
         decoded_value, stiff, track_ratio, cross_tol):
    if dt <= 0:
        raise ValueError("dt must be positive")
    h = _check_initial(h0, M if system == kernels.BUFFER else INF)
    n = h.size
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    if record_every is None:
        record_every = max(1, n_steps // max_samples)
    t_start = 0.0
    if system == kernels.BUFFER and np.any(h == 0.0):
        t_start = min(_BOOT_TIME, dt * 1e-3)
        _bootstrap(h, M, t_start)
    cap = n_steps // record_every + 1 if record_every > 0 else 0
    rec_t = np.empty(cap)
    rec_h = np.empty((cap, n))
    crossings = np.empty(n)
    rounds = n if max_rounds is None else int(max_rounds)
    h_init = np.array(h0, dtype=np.float64)
    t, first, n_rec, n_cross, max_ratio, status = kernels.impl.fluid_rk4(
        system, h, 0, _inv(M), float(decoded_value), 0.0, float(t_start),
        n_steps, float(dt), float(stiff), rounds, int(record_every),
        rec_t, rec_h, crossings, float(cross_tol), bool(track_ratio))
    if status == kernels.OVERSHOOT:
        raise FluidStepError(
            f"crossing overshoot beyond {cross_tol} near t={t:.6g}; reduce dt")
    ts = np.concatenate([[0.0], rec_t[:n_rec]])
    hs = np.vstack([h_init[None, :], rec_h[:n_rec]])
    if n_rec == 0 or ts[-1] != t:
        ts = np.append(ts, t)
        hs = np.vstack([hs, h[None, :]])
    final = FluidState(h=h.copy(), t=float(t), crossings=list(crossings[:n_cross]), M=M)
    return FluidTrajectory(t=ts, h=hs, crossings=crossings[:n_cross].copy(),
                           final=final, max_ratio=max_ratio)


def fluid_integrate(M: float, n_nodes: int, t_end: float, dt: float = 1e-4,
                    h0=None, *, max_rounds: int | None = None,
                    record_every: int | None = None, max_samples: int = 20000,
                    cross_tol: float = 1e-2) -> FluidTrajectory:
    """Integrate ``h_i' = 1 - h_i / h_{i-1}`` with renewal at ``h_i = 1``.

    ``h0`` defaults to all zeros (empty relays). Integration stops at
    ``t_end``, after ``max_rounds`` decode events, or when every node has
    decoded. Decoded nodes read ``M`` (``inf`` for the rateless limit).
    """
    if h0 is None:
        h0 = np.zeros(n_nodes)
    elif len(h0) != n_nodes:
        raise ValueError("h0 length must equal n_nodes")
    return _run(kernels.BUFFER, h0, float(M), t_end, dt, max_rounds,
                record_every, max_samples, float(M), _STIFF, False, cross_tol)


def proportional_fluid_integrate(n_nodes: int, t_end: float, dt: float = 1e-4,
                                 h0=None, *, max_rounds: int | None = None,
                                 record_every: int | None = None,
                                 max_samples: int = 20000,
                                 cross_tol: float = 1e-2) -> FluidTrajectory:
    """Integrate the proportional-forwarding chain.

    The head grows at unit rate and every other node follows
    ``h_i' = h_{i-1} - h_i``. ``max_ratio`` on the result is the largest
    successive-node ratio seen at any substep (head ratio taken as
    ``h/(h+1)``).
    """
    if h0 is None:
        h0 = np.zeros(n_nodes)
    elif len(h0) != n_nodes:
        raise ValueError("h0 length must equal n_nodes")
    return _run(kernels.PROPORTIONAL, h0, INF, t_end, dt, max_rounds,
                record_every, max_samples, INF, 0.0, True, cross_tol)


def round1_closed_form(t, n_nodes: int, M: float = INF) -> np.ndarray:
    """Exact first-round profile from empty relays, for ``t <= T_1``.

    Uses ``h_i = Q_i / Q_{i-1}`` with ``Q_i = M^i sum_{j>=i} (t/M)^j / j!``,
    rewritten as ``(t/i) F_i / F_{i-1}`` to stay finite for deep nodes.
    """
    t = float(t)
    out = np.empty(n_nodes)
    if math.isinf(M):
        out[:] = t / np.arange(1, n_nodes + 1)
        return out
    x = t / M

    def tail(i):
        # F_i = sum_{m>=0} x^m i!/(i+m)!
        total, term, m = 1.0, 1.0, 0
        while term > 1e-17 * total and m < 400:
            m += 1
            term *= x / (i + m)
            total += term
        return total

    f_prev = tail(0)
    for i in range(1, n_nodes + 1):
        f_i = tail(i)
        out[i - 1] = (t / i) * f_i / f_prev
        f_prev = f_i
    return out


def q_series_profile(M: float, h0, t: float) -> np.ndarray:
    """Profile at ``t <= T_1`` from the algebraic ``Q``-function solution.

    ``Q_0 = e^{t/M}``, ``Q_i(t) = sum_{j<i} Q_{i-j}(0) t^j / j! +
    M^i sum_{j>=i} (t/M)^j / j!`` and ``h_i = Q_i / Q_{i-1}``. Intended as
    an independent cross-check of the integrator on short chains.
    """
    h0 = np.asarray(h0, dtype=np.float64)
    n = h0.size
    q0 = np.concatenate([[1.0], np.cumprod(h0)])  # Q_i(0), i = 0..n
    q = np.empty(n + 1)
    for i in range(n + 1):
        head = sum(q0[i - j] * t ** j / math.factorial(j) for j in range(i))
        if math.isinf(M):
            tail = t ** i / math.factorial(i)
        else:
            x = t / M
            tail = 0.0
            term = x ** i / math.factorial(i)
            m = i
            while term > 1e-18 * max(tail, 1e-300) or m == i:
                tail += term
                m += 1
                term *= x / m
                if m > i + 400:
                    break
            tail *= M ** i
        q[i] = head + tail
    return q[1:] / q[:-1]


@dataclass
class MonotonicityReport:
    ordered: bool
    first_violation: tuple[int, float] | None
    max_violation: float

    def __bool__(self) -> bool:
        return self.ordered


def monotonicity_check(M: float, h0_a, h0_b, t_end: float, dt: float = 1e-4,
                       tol: float = 1e-9) -> MonotonicityReport:
    """Integrate two ordered initial profiles and compare them on the grid.

    Returns a report that is truthy iff ``h_a(t) >= h_b(t) - tol``
    componentwise at every grid time. ``first_violation`` is the 1-based
    node index and time of the first breach.
    """
    a = np.asarray(h0_a, dtype=np.float64)
    b = np.asarray(h0_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("profiles must have equal length")
    if np.any(a < b):
        raise ValueError("h0_a must dominate h0_b componentwise")
    n = a.size
    ta = fluid_integrate(M, n, t_end, dt, a, record_every=1)
    tb = fluid_integrate(M, n, t_end, dt, b, record_every=1)
    m = min(len(ta.t), len(tb.t))
    # both runs share the grid; an off-grid tail sample (run ended early) is dropped
    m = int(np.argmax(ta.t[:m] != tb.t[:m])) if np.any(ta.t[:m] != tb.t[:m]) else m
    with np.errstate(invalid="ignore"):
        # both decoded reads inf - inf; that pair is ordered
        gap = tb.h[:m] - ta.h[:m]
    gap = np.where(np.isnan(gap), 0.0, gap)
    bad = np.argwhere(gap > tol)
    if bad.size == 0:
        return MonotonicityReport(True, None, float(max(gap.max(), 0.0)))
    row, col = bad[0]
    return MonotonicityReport(False, (int(col) + 1, float(ta.t[row])), float(gap.max()))
