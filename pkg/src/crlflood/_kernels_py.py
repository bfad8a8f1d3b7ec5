"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``.

Signatures and operation order match the Cython versions; see that module
for argument semantics.
"""

import numpy as np

OK = 0
OVERSHOOT = 1

BUFFER = 0
PROPORTIONAL = 1


def chain_run(sizes, k, mk, one_minus_eps, u, slot0, decoded_at, h_next, rec):
    d = sizes.shape[0]
    n_rec = rec.shape[1]
    if not np.any(sizes[1:] < mk):
        return 0
    for row in range(u.shape[0]):
        slot = slot0 + row + 1
        old = sizes.copy()
        j = old[:-1]
        s = old[1:]
        active = s < mk
        hit = active & (u[row] * j < one_minus_eps * (j - s))
        new = s + hit
        done = hit & (new >= k)
        new[done] = mk
        sizes[1:] = new
        if done.any():
            idx = np.flatnonzero(done) + 1
            decoded_at[idx] = slot
            for i in idx:
                if i + 1 < d:
                    h_next[i] = float(sizes[i + 1])
        if n_rec:
            rec[row, :] = sizes[1:n_rec + 1]
        if not np.any(sizes[1:] < mk):
            return row + 1
    return u.shape[0]


def _deriv(system, h, first, n, inv_m, out):
    if system == BUFFER:
        out[first] = 1.0 - h[first] * inv_m
        out[first + 1:n] = 1.0 - h[first + 1:n] / h[first:n - 1]
    else:
        out[first] = 1.0
        out[first + 1:n] = h[first:n - 1] - h[first + 1:n]


def _rk4(system, y, first, n, inv_m, step, k1, k2, k3, k4, tmp):
    half = 0.5 * step
    sixth = step / 6.0
    sl = slice(first, n)
    _deriv(system, y, first, n, inv_m, k1)
    tmp[sl] = y[sl] + half * k1[sl]
    _deriv(system, tmp, first, n, inv_m, k2)
    tmp[sl] = y[sl] + half * k2[sl]
    _deriv(system, tmp, first, n, inv_m, k3)
    tmp[sl] = y[sl] + step * k3[sl]
    _deriv(system, tmp, first, n, inv_m, k4)
    y[sl] = y[sl] + sixth * (k1[sl] + 2.0 * k2[sl] + 2.0 * k3[sl] + k4[sl])


def fluid_rk4(system, h, first, inv_m, decoded_value, t0, t_start, n_steps, dt, stiff,
              max_rounds, record_every, rec_t, rec_h, crossings, cross_tol,
              track_ratio):
    n = h.shape[0]
    n_rec = n_cross = 0
    t = t_start
    max_ratio = 0.0
    status = OK
    k1, k2, k3, k4, tmp, save = (h.copy() for _ in range(6))
    done = first >= n

    for s in range(n_steps):
        if done:
            break
        t_grid = t0 + (s + 1) * dt
        while t < t_grid and not done:
            hs = t_grid - t
            full = True
            if stiff > 0.0 and first < n - 1:
                lim = stiff * h[first:n - 1].min()
                if lim < hs:
                    hs = lim
                    full = False
            save[first:n] = h[first:n]
            _rk4(system, h, first, n, inv_m, hs, k1, k2, k3, k4, tmp)
            if h[first] >= 1.0:
                if h[first] - 1.0 > cross_tol:
                    status = OVERSHOOT
                old_first = save[first]
                frac = (1.0 - old_first) / (h[first] - old_first)
                h[first:n] = save[first:n]
                _rk4(system, h, first, n, inv_m, hs * frac, k1, k2, k3, k4, tmp)
                t = t + hs * frac
                h[first] = decoded_value
                crossings[n_cross] = t
                n_cross += 1
                first += 1
                if first >= n or n_cross >= max_rounds or status != OK:
                    done = True
            elif full:
                t = t_grid
            else:
                t = t + hs
            if track_ratio and first < n:
                r = h[first] / (h[first] + 1.0)
                if r > max_ratio:
                    max_ratio = r
                prev = h[first:n - 1]
                ok = prev > 1e-290
                if ok.any():
                    r = (h[first + 1:n][ok] / prev[ok]).max()
                    if r > max_ratio:
                        max_ratio = r
        if not done:
            t = t_grid
        if record_every > 0 and (s + 1) % record_every == 0 and n_rec < rec_t.shape[0]:
            rec_t[n_rec] = t
            rec_h[n_rec, :] = h
            n_rec += 1
    return float(t), int(first), n_rec, n_cross, float(max_ratio), status
