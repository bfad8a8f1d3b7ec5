"""Fixed points of the renewal fluid system and closed-form delay bounds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

INF = math.inf


def bisect(f, lo: float, hi: float, tol: float = 0.0, max_iter: int = 200) -> float:
    """Root of a continuous ``f`` with a sign change on ``[lo, hi]``.

    Stops when ``|f(mid)| <= tol`` or the bracket can no longer shrink.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError("bracket does not straddle a root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if abs(fm) <= tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _tf_residual(x: float, M: float) -> float:
    return -math.log(x) - 1.0 + (0.0 if math.isinf(M) else x / M)


def solve_TF(M: float = INF, tol: float = 0.0) -> tuple[float, float]:
    """Asymptotic per-hop delay ``T^F(M)`` and the tail fullness ``h_inf``.

    Solves ``-ln x = 1 - x/M`` on ``(0, 1]``; at the maximizing fixed point
    the two quantities coincide, so the pair returned is ``(x, x)``.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if not (M > 1):
        raise ValueError("M must exceed 1")
    # residual is strictly decreasing on (0, 1] for M > 1; tol=0 bisects to the last ulp
    x = bisect(lambda v: _tf_residual(v, M), 1e-300, 1.0, tol=tol)
    return x, x


def steady_tail(T: float, M: float = INF) -> float:
    """Largest ``h`` in ``(0, 1]`` with ``T = -h ln h / (1 - h/M)``."""
    tf, hf = solve_TF(M)
    if T < 0 or T > tf * (1 + 1e-12):
        raise ValueError(f"T={T} exceeds T^F(M)={tf}")
    if T == 0:
        return 1.0
    inv_m = 0.0 if math.isinf(M) else 1.0 / M

    def g(h):
        return -h * math.log(h) / (1.0 - h * inv_m) - T

    if g(hf) <= 0:
        return hf
    return bisect(g, hf, 1.0)


@dataclass
class FixedPointProfile:
    T: float
    h_inf: float
    h0: np.ndarray
    M: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# T={self.T!r} h_inf={self.h_inf!r} M={self.M!r}\n")
            w = csv.writer(fh)
            w.writerow(["i", "h0_i"])
            for i, v in enumerate(self.h0, start=1):
                w.writerow([i, repr(float(v))])


def fixed_point_profile(M: float, T: float | None = None, depth: int = 64,
                        max_terms: int = 200) -> FixedPointProfile:
    """Start-of-round profile that the renewal map sends to itself.

    Evaluates ``h_i = e^{T/M} - T - T sum_{j>=2} (1/j!) prod_{l<j} T/h_{i-l}``
    with ``h_i = M`` for ``i <= 0``. ``T`` defaults to ``T^F(M)``.
    """
    tf, _ = solve_TF(M)
    if T is None:
        T = tf
    if T > tf * (1 + 1e-12):
        raise ValueError(f"no fixed point for T={T} > T^F(M)={tf}")
    e_term = 1.0 if math.isinf(M) else math.exp(T / M)
    h = np.empty(depth)

    def past(i):
        # h_{i} for i <= 0 is the source fullness
        return M if i <= 0 else h[i - 1]

    for i in range(1, depth + 1):
        total = 0.0
        prod = 1.0
        fact = 1.0
        for j in range(2, max_terms + 2):
            back = past(i - (j - 1))
            if math.isinf(back):
                break
            prod *= T / back
            fact *= j
            term = prod / fact
            total += term
            if term < 1e-15:
                break
        h[i - 1] = e_term - T - T * total
    return FixedPointProfile(T=T, h_inf=steady_tail(T, M), h0=h, M=M)


def h_star(i: int, M: float = INF) -> float:
    """Reference profile ``1/((i+1) - i/M)``, equal to ``M`` at ``i = 0``."""
    if i < 0:
        raise ValueError("i must be non-negative")
    if i == 0:
        return M
    inv_m = 0.0 if math.isinf(M) else 1.0 / M
    return 1.0 / ((i + 1) - i * inv_m)


def theorem1_bound(n: int, M: float = INF) -> float:
    """Bound on the normalized ``n``-hop delay ``(1-eps) T_n / k``.

    ``M ln(M/(M-1)) + (n-1) M ln((2M-1)/(2M-2))``; the ``M -> inf`` limit
    is ``1 + (n-1)/2``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if math.isinf(M):
        return 1.0 + (n - 1) / 2.0
    if M < 2:
        raise ValueError("M must be >= 2")
    first = M * math.log(M / (M - 1.0))
    per_hop = M * math.log((2.0 * M - 1.0) / (2.0 * M - 2.0))
    return first + (n - 1) * per_hop


def one_hop_asymptote(M: float, eps: float = 0.0) -> float:
    """Limit of ``T_1 / k`` for one hop: ``M ln(M/(M-1)) / (1 - eps)``."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    if math.isinf(M):
        return 1.0 / (1.0 - eps)
    if M <= 1:
        raise ValueError("M must exceed 1")
    # -M*log1p(-1/M) keeps precision for very large M
    return -M * math.log1p(-1.0 / M) / (1.0 - eps)


def proportional_fixed_point_T() -> float:
    """Root in (0, 1) of ``(1-T) T + T^2/2 = 1 - T``, i.e. ``2 - sqrt(2)``."""
    # T^2 - 4T + 2 = 0
    disc = math.sqrt(16.0 - 8.0)
    roots = sorted([(4.0 - disc) / 2.0, (4.0 + disc) / 2.0])
    inside = [r for r in roots if 0.0 < r < 1.0]
    if len(inside) != 1:
        raise ArithmeticError("expected exactly one root in (0, 1)")
    return inside[0]
