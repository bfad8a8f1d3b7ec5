"""Buffer-size Markov chain of the line network and its fluid comparison.

Only ``|H_i(t)|`` is tracked. Node ``i`` grows by one with probability
``(1 - eps)(j - s)/j`` where ``j`` and ``s`` are the start-of-slot sizes of
node ``i - 1`` and node ``i``; a node that reaches ``k`` decodes and then
counts as ``M k``, i.e. a full secondary source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from .fluid import fluid_integrate

# stand-in for M k with a rateless code: large but safe in int64 and exact in float64
_RATELESS_MK = 1 << 52


@dataclass(frozen=True)
class ChainResult:
    k: int
    M: float
    eps: float
    decoded_at: np.ndarray   # slot at which node i decoded, -1 if never; entry 0 is the source
    h_next: np.ndarray       # |H_{i+1}| at the end of node i's decode slot, NaN if undefined
    slots: int
    sizes: np.ndarray | None  # row t = sizes of nodes 1..n_record after slot t (row 0 = start)

    def normalized_delays(self) -> np.ndarray:
        """``(1 - eps) T_n / k`` for hops ``n = 1..d-1`` (NaN if undecoded)."""
        t = self.decoded_at[1:].astype(float)
        t[t < 0] = np.nan
        return (1.0 - self.eps) * t / self.k

    def half_buffer_fractions(self) -> np.ndarray:
        """``|H_{n+1}(T_n)| / (k - 1)`` for ``n = 1..d-2``."""
        return self.h_next[1:-1] / (self.k - 1)


def _mk(k: int, M: float) -> int:
    if math.isinf(M):
        return _RATELESS_MK
    if M * k != int(M * k):
        raise ValueError("M k must be an integer")
    return int(M * k)


def simulate_chain(k: int, M: float, eps: float, d: int, rng, *,
                   horizon: int | None = None, n_record: int = 0,
                   chunk: int = 4096) -> ChainResult:
    """Run the analytic line channel from empty relays until all decode.

    ``rng`` is a ``numpy.random.Generator`` (or a seed). Uniforms are drawn
    in blocks of ``chunk`` slots, one per relay per slot. ``n_record``
    leading relays have their sizes stored every slot.
    """
    if d < 2:
        raise ValueError("a line needs at least two nodes")
    if k < 1:
        raise ValueError("k must be positive")
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    rng = np.random.default_rng(rng)
    mk = _mk(k, M)
    n_record = min(n_record, d - 1)
    sizes = np.zeros(d, dtype=np.int64)
    sizes[0] = mk
    decoded_at = np.full(d, -1, dtype=np.int64)
    decoded_at[0] = 0
    h_next = np.full(d, np.nan)
    limit = horizon if horizon is not None else 1 << 62
    blocks = []
    slot = 0
    while slot < limit and np.any(sizes[1:] < mk):
        rows = min(chunk, limit - slot)
        u = rng.random((rows, d - 1))
        rec = np.empty((rows, n_record), dtype=np.int64)
        used = kernels.impl.chain_run(sizes, k, mk, 1.0 - eps, u, slot,
                                      decoded_at, h_next, rec)
        if n_record:
            blocks.append(rec[:used])
        slot += used
    trace = None
    if n_record:
        trace = np.vstack([np.zeros((1, n_record), dtype=np.int64)] + blocks)
    return ChainResult(k=k, M=M, eps=eps, decoded_at=decoded_at, h_next=h_next,
                       slots=slot, sizes=trace)


def discrete_vs_fluid(M: float, eps: float, k: int, n_nodes: int, t_grid=None,
                      rng=0, *, dt: float = 1e-4) -> float:
    """Largest gap between scaled chain sizes and the fluid profile.

    Chain time is rescaled by ``(1 - eps)/k``. Both sides are capped at 1
    (a decoded node reads ``M`` in the fluid and ``M k`` in the chain, but
    the capped fullness is continuous through decoding). ``t_grid``
    defaults to 200 points up to the fluid decode time of node
    ``n_nodes``. Chain sizes are read at the last slot not after each
    grid time; fluid values are linearly interpolated on its step grid.
    """
    if t_grid is None:
        probe = fluid_integrate(M, n_nodes, 50.0 * n_nodes, dt, max_rounds=n_nodes,
                                max_samples=1)
        t_grid = np.linspace(0.0, probe.crossings[-1], 200)
    t_grid = np.asarray(t_grid, dtype=float)
    t_end = float(t_grid.max())
    traj = fluid_integrate(M, n_nodes, t_end + 2 * dt, dt, record_every=1)
    fl = np.minimum(traj.h, 1.0)
    fluid_at = np.column_stack([np.interp(t_grid, traj.t, fl[:, i]) for i in range(n_nodes)])
    scale = (1.0 - eps) / k
    last_slot = int(math.ceil(t_end / scale)) + 1
    res = simulate_chain(k, M, eps, n_nodes + 1, rng, horizon=last_slot, n_record=n_nodes)
    trace = res.sizes
    slots = np.minimum(np.floor(t_grid / scale + 1e-9).astype(np.int64), trace.shape[0] - 1)
    disc = np.minimum(trace[slots] / k, 1.0)
    return float(np.abs(disc - fluid_at).max())


@dataclass(frozen=True)
class RatioState:
    """Successive-node ratios ``r_i = h_i / h_{i-1}`` of a profile.

    ``r[0]`` compares node 1 with the source at fullness ``M``.
    """

    r: np.ndarray

    @classmethod
    def from_profile(cls, h, M: float = math.inf) -> "RatioState":
        h = np.asarray(h, dtype=float)
        prev = np.concatenate([[M], h[:-1]])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(np.isinf(prev), 0.0, h / prev)
        return cls(r)

    @property
    def R(self) -> np.ndarray:
        return 1.0 / (2.0 - self.r)

    def alpha(self, h) -> np.ndarray:
        return (2.0 - self.r) / np.asarray(h, dtype=float)

    def regularly_ordered(self, tol: float = 0.0) -> bool:
        """``r_i >= R_{i-1}`` for every ``i >= 2``."""
        return bool(np.all(self.r[1:] >= self.R[:-1] - tol))
