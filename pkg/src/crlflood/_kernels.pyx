# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: line-network buffer chain and renewal fluid RK4.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature and the same floating-point operation order, so both backends
produce matching results on identical inputs.
"""

ctypedef long long i64

cdef enum:
    OK = 0
    OVERSHOOT = 1

# system ids for the fluid kernel
cdef enum:
    BUFFER = 0
    PROPORTIONAL = 1


def chain_run(i64[::1] sizes, i64 k, i64 mk, double one_minus_eps,
              double[:, ::1] u, i64 slot0,
              i64[::1] decoded_at, double[::1] h_next,
              i64[:, ::1] rec):
    """Advance the buffer-size chain by at most ``u.shape[0]`` slots.

    Returns the number of slots consumed. Stops early after the slot in
    which the last relay decodes.
    """
    cdef Py_ssize_t d = sizes.shape[0]
    cdef Py_ssize_t n_rec = rec.shape[1]
    cdef Py_ssize_t row, i
    cdef i64 j, s, slot
    cdef i64 undecoded = 0
    for i in range(1, d):
        if sizes[i] < mk:
            undecoded += 1
    if undecoded == 0:
        return 0
    for row in range(u.shape[0]):
        slot = slot0 + row + 1
        # descending order keeps the predecessor at its start-of-slot value
        for i in range(d - 1, 0, -1):
            s = sizes[i]
            if s >= mk:
                continue
            j = sizes[i - 1]
            if u[row, i - 1] * j < one_minus_eps * (j - s):
                s += 1
                if s >= k:
                    sizes[i] = mk
                    decoded_at[i] = slot
                    undecoded -= 1
                    if i + 1 < d:
                        h_next[i] = <double>sizes[i + 1]
                else:
                    sizes[i] = s
        for i in range(n_rec):
            rec[row, i] = sizes[i + 1]
        if undecoded == 0:
            return row + 1
    return u.shape[0]


cdef inline void _deriv(int system, double[::1] h, Py_ssize_t first,
                        Py_ssize_t n, double inv_m, double[::1] out) nogil:
    cdef Py_ssize_t i
    if system == BUFFER:
        out[first] = 1.0 - h[first] * inv_m
        for i in range(first + 1, n):
            out[i] = 1.0 - h[i] / h[i - 1]
    else:
        out[first] = 1.0
        for i in range(first + 1, n):
            out[i] = h[i - 1] - h[i]


cdef inline void _rk4(int system, double[::1] y, Py_ssize_t first,
                      Py_ssize_t n, double inv_m, double step,
                      double[::1] k1, double[::1] k2, double[::1] k3,
                      double[::1] k4, double[::1] tmp) nogil:
    cdef Py_ssize_t i
    cdef double half = 0.5 * step
    cdef double sixth = step / 6.0
    _deriv(system, y, first, n, inv_m, k1)
    for i in range(first, n):
        tmp[i] = y[i] + half * k1[i]
    _deriv(system, tmp, first, n, inv_m, k2)
    for i in range(first, n):
        tmp[i] = y[i] + half * k2[i]
    _deriv(system, tmp, first, n, inv_m, k3)
    for i in range(first, n):
        tmp[i] = y[i] + step * k3[i]
    _deriv(system, tmp, first, n, inv_m, k4)
    for i in range(first, n):
        y[i] = y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def fluid_rk4(int system, double[::1] h, Py_ssize_t first, double inv_m,
              double decoded_value, double t0, double t_start, i64 n_steps,
              double dt,
              double stiff, i64 max_rounds, i64 record_every,
              double[::1] rec_t, double[:, ::1] rec_h,
              double[::1] crossings, double cross_tol, bint track_ratio):
    """Fixed-grid RK4 over the renewal system with crossing detection.

    ``h`` is modified in place (absolute node indexing; entries before
    ``first`` hold ``decoded_value``). Returns
    ``(t, first, n_rec, n_cross, max_ratio, status)``.
    """
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t i
    cdef i64 s, n_rec = 0, n_cross = 0
    cdef double t = t_start, t_grid, hs, lim, frac, old_first
    cdef bint full
    cdef double max_ratio = 0.0, r
    cdef int status = OK
    cdef double[::1] k1 = h.copy()
    cdef double[::1] k2 = h.copy()
    cdef double[::1] k3 = h.copy()
    cdef double[::1] k4 = h.copy()
    cdef double[::1] tmp = h.copy()
    cdef double[::1] save = h.copy()
    cdef bint done = first >= n

    for s in range(n_steps):
        if done:
            break
        t_grid = t0 + (s + 1) * dt
        while t < t_grid and not done:
            hs = t_grid - t
            full = True
            if stiff > 0.0:
                for i in range(first, n - 1):
                    lim = stiff * h[i]
                    if lim < hs:
                        hs = lim
                        full = False
            for i in range(first, n):
                save[i] = h[i]
            _rk4(system, h, first, n, inv_m, hs, k1, k2, k3, k4, tmp)
            if h[first] >= 1.0:
                if h[first] - 1.0 > cross_tol:
                    status = OVERSHOOT
                old_first = save[first]
                frac = (1.0 - old_first) / (h[first] - old_first)
                for i in range(first, n):
                    h[i] = save[i]
                _rk4(system, h, first, n, inv_m, hs * frac,
                     k1, k2, k3, k4, tmp)
                t = t + hs * frac
                h[first] = decoded_value
                crossings[n_cross] = t
                n_cross += 1
                first += 1
                if first >= n or n_cross >= max_rounds:
                    done = True
                if status != OK:
                    done = True
            elif full:
                t = t_grid
            else:
                t = t + hs
            if track_ratio and first < n:
                r = h[first] / (h[first] + 1.0)
                if r > max_ratio:
                    max_ratio = r
                for i in range(first + 1, n):
                    if h[i - 1] > 1e-290:
                        r = h[i] / h[i - 1]
                        if r > max_ratio:
                            max_ratio = r
        if not done:
            t = t_grid
        if record_every > 0 and (s + 1) % record_every == 0 and n_rec < rec_t.shape[0]:
            rec_t[n_rec] = t
            for i in range(n):
                rec_h[n_rec, i] = h[i]
            n_rec += 1
    return t, first, n_rec, n_cross, max_ratio, status
