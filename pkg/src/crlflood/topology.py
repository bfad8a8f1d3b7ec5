"""Line networks and a synthetic Manhattan grid with Markov mobility."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROW_TOL = 1e-9


@dataclass(frozen=True)
class LineNetwork:
    """Static chain ``0 - 1 - ... - d-1``; node 0 is the source."""

    d: int
    spacing_m: float = 150.0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("a line network needs at least 2 nodes")

    def neighbors(self, i: int) -> list[int]:
        if not 0 <= i < self.d:
            raise IndexError(i)
        return [j for j in (i - 1, i + 1) if 0 <= j < self.d]

    def positions(self) -> np.ndarray:
        xs = np.arange(self.d, dtype=float) * self.spacing_m
        return np.column_stack([xs, np.zeros(self.d)])


def build_line(d: int, spacing_m: float = 150.0) -> LineNetwork:
    return LineNetwork(d, spacing_m)


@dataclass
class RoadGraph:
    """Directed road segments plus a row-stochastic turn matrix.

    ``tail`` and ``head`` are ``(n, 2)`` arrays of segment endpoints in
    meters; vehicles move from tail to head.
    """

    tail: np.ndarray
    head: np.ndarray
    P: np.ndarray
    seg_ids: list = field(default=None)

    def __post_init__(self):
        self.tail = np.asarray(self.tail, dtype=float)
        self.head = np.asarray(self.head, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        n = len(self.tail)
        if self.seg_ids is None:
            self.seg_ids = list(range(n))
        if self.head.shape != (n, 2) or self.tail.shape != (n, 2):
            raise ValueError("segment endpoint arrays must be (n, 2)")
        if self.P.shape != (n, n):
            raise ValueError("transition matrix must be n x n")
        self.validate()
        self.length = np.hypot(*(self.head - self.tail).T)
        if np.any(self.length <= 0):
            raise ValueError("segments must have positive length")
        self._succ, self._cum = _successor_tables(self.P)

    @property
    def n_segments(self) -> int:
        return len(self.tail)

    def validate(self) -> None:
        if np.any(self.P < 0):
            raise ValueError("transition probabilities must be non-negative")
        sums = self.P.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
        if bad.size:
            raise ValueError(f"row {self.seg_ids[bad[0]]} of P sums to {sums[bad[0]]!r}, not 1")
        rows, cols = np.nonzero(self.P)
        gap = np.hypot(*(self.tail[cols] - self.head[rows]).T)
        wrong = np.flatnonzero(gap > 1e-6)
        if wrong.size:
            i, j = rows[wrong[0]], cols[wrong[0]]
            raise ValueError(
                f"P[{self.seg_ids[i]}, {self.seg_ids[j]}] > 0 but the segments are not joined")

    def point_at(self, seg: np.ndarray, offset: np.ndarray) -> np.ndarray:
        frac = (offset / self.length[seg])[:, None]
        return self.tail[seg] + frac * (self.head[seg] - self.tail[seg])

    def stationary(self, iters: int = 20000, tol: float = 1e-13) -> np.ndarray:
        """Stationary law of the segment chain by power iteration.

        The lazy chain ``(I + P)/2`` is iterated so periodic grids converge.
        """
        n = self.n_segments
        pi = np.full(n, 1.0 / n)
        for _ in range(iters):
            nxt = 0.5 * (pi + pi @ self.P)
            if np.abs(nxt - pi).sum() < tol:
                return nxt
            pi = nxt
        return pi


def _successor_tables(P: np.ndarray):
    width = max(1, int((P > 0).sum(axis=1).max()))
    n = P.shape[0]
    succ = np.zeros((n, width), dtype=np.int64)
    cum = np.ones((n, width))
    for i in range(n):
        js = np.flatnonzero(P[i] > 0)
        succ[i, :js.size] = js
        succ[i, js.size:] = js[-1]
        c = np.cumsum(P[i, js])
        c[-1] = 1.0
        cum[i, :js.size] = c
    return succ, cum


def build_grid(rows: int, cols: int, block_m: float = 100.0, turn_bias: float = 0.5,
               rng=None) -> RoadGraph:
    """Manhattan grid of two-way streets as directed segments.

    At each intersection the straight continuation (if any) gets
    ``turn_bias`` and the remaining mass is split evenly over the other
    legal exits. U-turns are used only at dead ends. ``rng`` is accepted
    for interface symmetry; the construction is deterministic.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid needs at least 2 rows and 2 columns")
    if not block_m > 0:
        raise ValueError("block_m must be positive")
    if not 0.0 <= turn_bias <= 1.0:
        raise ValueError("turn_bias must lie in [0, 1]")
    segs = []
    for r in range(rows):
        for c in range(cols):
            for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                r2, c2 = r + dr, c + dc
                if 0 <= r2 < rows and 0 <= c2 < cols:
                    segs.append(((c, r), (c2, r2)))
    index = {s: i for i, s in enumerate(segs)}
    out = {}
    for i, (a, b) in enumerate(segs):
        out.setdefault(a, []).append(i)
    n = len(segs)
    P = np.zeros((n, n))
    for i, (a, b) in enumerate(segs):
        direction = (b[0] - a[0], b[1] - a[1])
        exits = [j for j in out[b] if segs[j][1] != a]
        if not exits:
            P[i, index[(b, a)]] = 1.0
            continue
        straight = [j for j in exits
                    if (segs[j][1][0] - b[0], segs[j][1][1] - b[1]) == direction]
        turns = [j for j in exits if j not in straight]
        if straight and turns:
            P[i, straight[0]] = turn_bias
            for j in turns:
                P[i, j] = (1.0 - turn_bias) / len(turns)
        else:
            for j in exits:
                P[i, j] = 1.0 / len(exits)
    tail = np.array([a for a, _ in segs], dtype=float) * block_m
    head = np.array([b for _, b in segs], dtype=float) * block_m
    return RoadGraph(tail, head, P)


def parse_road_graph(text: str) -> RoadGraph:
    """Read ``SEG id x1 y1 x2 y2`` and ``TRANS i j p`` records.

    Blank lines and ``#`` comments are ignored. Segment ids are arbitrary
    tokens; all SEG records must precede the first TRANS record.
    """
    ids, tails, heads, trans = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "SEG" and len(parts) == 6:
                if trans:
                    raise ValueError("SEG record after TRANS records")
                ids.append(parts[1])
                x1, y1, x2, y2 = map(float, parts[2:])
                tails.append((x1, y1))
                heads.append((x2, y2))
            elif parts[0] == "TRANS" and len(parts) == 4:
                trans.append((parts[1], parts[2], float(parts[3])))
            else:
                raise ValueError(f"unrecognized record {parts[0]!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not ids:
        raise ValueError("road graph has no segments")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate segment id")
    pos = {s: i for i, s in enumerate(ids)}
    P = np.zeros((len(ids), len(ids)))
    for a, b, p in trans:
        if a not in pos or b not in pos:
            raise ValueError(f"TRANS references unknown segment {a if a not in pos else b!r}")
        P[pos[a], pos[b]] += p
    return RoadGraph(np.array(tails), np.array(heads), P, seg_ids=ids)


def load_road_graph(path) -> RoadGraph:
    with open(path) as fh:
        return parse_road_graph(fh.read())


def format_road_graph(graph: RoadGraph) -> str:
    lines = [f"SEG {sid} {float(t[0])!r} {float(t[1])!r} {float(h[0])!r} {float(h[1])!r}"
             for sid, t, h in zip(graph.seg_ids, graph.tail, graph.head)]
    for i, j in zip(*np.nonzero(graph.P)):
        lines.append(f"TRANS {graph.seg_ids[i]} {graph.seg_ids[j]} {float(graph.P[i, j])!r}")
    return "\n".join(lines) + "\n"


@dataclass
class VehicleState:
    segment: int
    offset: float
    speed: float


@dataclass
class Fleet:
    """Struct-of-arrays form of many :class:`VehicleState` records."""

    segment: np.ndarray
    offset: np.ndarray
    speed: np.ndarray

    @classmethod
    def from_states(cls, states) -> "Fleet":
        return cls(np.array([s.segment for s in states], dtype=np.int64),
                   np.array([s.offset for s in states], dtype=float),
                   np.array([s.speed for s in states], dtype=float))

    def states(self) -> list[VehicleState]:
        return [VehicleState(int(s), float(o), float(v))
                for s, o, v in zip(self.segment, self.offset, self.speed)]

    def __len__(self) -> int:
        return len(self.segment)

    def positions(self, graph: RoadGraph) -> np.ndarray:
        return graph.point_at(self.segment, self.offset)


def place_vehicles(graph: RoadGraph, count: int, rng, speed_range=(15.0, 25.0)) -> Fleet:
    """Uniform placement along the road network with uniform speeds.

    Segments are drawn with probability proportional to their length and
    offsets uniformly within the segment.
    """
    p = graph.length / graph.length.sum()
    seg = rng.choice(graph.n_segments, size=count, p=p)
    offset = rng.random(count) * graph.length[seg]
    lo, hi = speed_range
    speed = rng.uniform(lo, hi, size=count)
    return Fleet(seg.astype(np.int64), offset, speed)


def step_mobility(vehicles, graph: RoadGraph, dt: float, rng):
    """Advance every vehicle by ``speed * dt`` along the road graph.

    Accepts a :class:`Fleet` (updated in place and returned) or a list of
    :class:`VehicleState` (a new list is returned).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    as_list = not isinstance(vehicles, Fleet)
    fleet = Fleet.from_states(vehicles) if as_list else vehicles
    fleet.offset += fleet.speed * dt
    over = np.flatnonzero(fleet.offset > graph.length[fleet.segment])
    while over.size:
        seg = fleet.segment[over]
        fleet.offset[over] -= graph.length[seg]
        u = rng.random(over.size)
        pick = (u[:, None] >= graph._cum[seg]).sum(axis=1)
        pick = np.minimum(pick, graph._succ.shape[1] - 1)
        fleet.segment[over] = graph._succ[seg, pick]
        still = fleet.offset[over] > graph.length[fleet.segment[over]]
        over = over[still]
    return fleet.states() if as_list else fleet


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    x = positions[:, 0]
    y = positions[:, 1]
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    return np.sqrt(dx * dx + dy * dy)


def neighbors_within(positions, center: int, radius_m: float) -> list[int]:
    """Ids of other nodes within the closed ball of ``radius_m``."""
    if not radius_m > 0:
        raise ValueError("radius must be positive")
    pts = np.asarray(positions, dtype=float)
    dist = np.hypot(*(pts - pts[center]).T)
    hits = np.flatnonzero(dist <= radius_m)
    return [int(i) for i in hits if i != center]


def grid_source_points(rows: int, cols: int, block_m: float) -> np.ndarray:
    """Four static source sites at the quarter points of the grid."""
    xs = [round((cols - 1) * f) for f in (0.25, 0.75)]
    ys = [round((rows - 1) * f) for f in (0.25, 0.75)]
    return np.array([(x, y) for y in ys for x in xs], dtype=float) * block_m

