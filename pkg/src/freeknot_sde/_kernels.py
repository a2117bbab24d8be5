"""Compiled inner loops for degree 0 and degree 1 sup-norm fits.

Everything here works on plain float arrays. Grid scans take a path's
values, its step ``dt`` and absolute indices; local abscissae are
``(i - start) * dt`` so that a scan and a from-scratch fit of the same
window see bit-identical inputs.

Degree 1 state is a pair of monotone-chain hulls (upper and lower) stored
in caller-owned buffers. The best line's error is half the minimal
vertical width of the point set, found by sweeping the merged edge
slopes of both hulls.
"""

import numba as nb
import numpy as np

INF = np.inf

# status codes of the greedy piece counter
FITS = 0
OVER_BUDGET = 1
DEGENERATE = 2


@nb.njit(cache=True, nogil=True)
def range_error(values, start, stop):
    lo = values[start]
    hi = lo
    for i in range(start + 1, stop + 1):
        v = values[i]
        if v < lo:
            lo = v
        elif v > hi:
            hi = v
    return 0.5 * (hi - lo), lo, hi


@nb.njit(cache=True, nogil=True)
def range_scan(values, start, stop, eps):
    """First ``e`` in ``(start, stop]`` with ``(max - min) / 2 > eps`` on ``[start, e]``, else -1."""
    lo = values[start]
    hi = lo
    two_eps = 2.0 * eps
    for i in range(start + 1, stop + 1):
        v = values[i]
        if v < lo:
            lo = v
        elif v > hi:
            hi = v
        if hi - lo > two_eps:
            return i
    return -1


@nb.njit(cache=True, nogil=True)
def hull_push(hx, hy, n, px, py, upper):
    while n >= 2:
        cr = (hx[n - 1] - hx[n - 2]) * (py - hy[n - 2]) - (hy[n - 1] - hy[n - 2]) * (px - hx[n - 2])
        if upper:
            if cr < 0.0:
                break
        elif cr > 0.0:
            break
        n -= 1
    hx[n] = px
    hy[n] = py
    return n + 1


@nb.njit(cache=True, nogil=True)
def strip_fit(ux, uy, nu, lx, ly, nl):
    """Best line for the points whose hulls are given.

    Returns ``(error, slope, offset)``; the line is ``offset + slope * x``.
    """
    if nu == 1:
        return 0.0, 0.0, uy[0]
    iu = nu - 1
    jl = 0
    best = INF
    best_s = 0.0
    best_c = 0.0
    while True:
        su = (uy[iu] - uy[iu - 1]) / (ux[iu] - ux[iu - 1]) if iu > 0 else INF
        sl = (ly[jl + 1] - ly[jl]) / (lx[jl + 1] - lx[jl]) if jl < nl - 1 else INF
        s = su if su <= sl else sl
        if s == INF:
            break
        top = uy[iu] - s * ux[iu]
        bot = ly[jl] - s * lx[jl]
        f = top - bot
        if f < best:
            best = f
            best_s = s
            best_c = 0.5 * (top + bot)
        if su <= sl:
            iu -= 1
        else:
            jl += 1
        if lx[jl] >= ux[iu]:
            break
    if best < 0.0:
        best = 0.0
    return 0.5 * best, best_s, best_c


@nb.njit(cache=True, nogil=True)
def line_fit_xy(xs, ys):
    n = xs.size
    ux = np.empty(n)
    uy = np.empty(n)
    lx = np.empty(n)
    ly = np.empty(n)
    nu = 0
    nl = 0
    for i in range(n):
        nu = hull_push(ux, uy, nu, xs[i], ys[i], True)
        nl = hull_push(lx, ly, nl, xs[i], ys[i], False)
    return strip_fit(ux, uy, nu, lx, ly, nl)


@nb.njit(cache=True, nogil=True)
def line_scan(values, dt, start, stop, eps, ux, uy, lx, ly):
    """Degree 1 analogue of :func:`range_scan`; buffers need ``stop - start + 1`` slots."""
    state = np.zeros(5)
    return line_scan_resume(values, dt, start, start, stop, eps, ux, uy, lx, ly, state)


@nb.njit(cache=True, nogil=True)
def line_scan_resume(values, dt, start, resume, stop, eps, ux, uy, lx, ly, state):
    """:func:`line_scan` that continues at index ``resume``.

    ``state`` holds ``(hull sizes, error, slope, offset)`` and is updated in
    place, so a scan may be split into consecutive calls over growing data.
    """
    if resume == start:
        nu = hull_push(ux, uy, 0, 0.0, values[start], True)
        nl = hull_push(lx, ly, 0, 0.0, values[start], False)
        err = 0.0
        slope = 0.0
        offset = values[start]
        resume += 1
    else:
        nu = int(state[0])
        nl = int(state[1])
        err = state[2]
        slope = state[3]
        offset = state[4]
    found = -1
    for i in range(resume, stop + 1):
        x = (i - start) * dt
        y = values[i]
        nu = hull_push(ux, uy, nu, x, y, True)
        nl = hull_push(lx, ly, nl, x, y, False)
        # the current line stays optimal while new points fall inside its strip
        if abs(y - (offset + slope * x)) <= err:
            continue
        err, slope, offset = strip_fit(ux, uy, nu, lx, ly, nl)
        if err > eps:
            found = i
            break
    state[0] = nu
    state[1] = nl
    state[2] = err
    state[3] = slope
    state[4] = offset
    return found


@nb.njit(cache=True, nogil=True)
def range_scan_resume(values, resume, stop, eps, state):
    """:func:`range_scan` from index 0, continued at ``resume`` with ``state = (lo, hi)``."""
    if resume == 0:
        state[0] = values[0]
        state[1] = values[0]
        resume = 1
    lo = state[0]
    hi = state[1]
    two_eps = 2.0 * eps
    found = -1
    for i in range(resume, stop + 1):
        v = values[i]
        if v < lo:
            lo = v
        elif v > hi:
            hi = v
        if hi - lo > two_eps:
            found = i
            break
    state[0] = lo
    state[1] = hi
    return found


@nb.njit(cache=True, nogil=True)
def line_error(values, dt, start, stop, ux, uy, lx, ly):
    nu = 0
    nl = 0
    for i in range(start, stop + 1):
        x = (i - start) * dt
        nu = hull_push(ux, uy, nu, x, values[i], True)
        nl = hull_push(lx, ly, nl, x, values[i], False)
    return strip_fit(ux, uy, nu, lx, ly, nl)


@nb.njit(cache=True, nogil=True)
def first_exceed(values, dt, start, stop, eps, degree, ux, uy, lx, ly):
    if degree == 0:
        return range_scan(values, start, stop, eps)
    return line_scan(values, dt, start, stop, eps, ux, uy, lx, ly)


@nb.njit(cache=True, nogil=True)
def greedy_pieces(values, dt, start, stop, eps, degree, budget, strict, knots):
    """Greedy maximal pieces on ``[start, stop]`` at level ``eps``.

    Consecutive pieces share their boundary index; ``knots[0..count]``
    receives the boundaries. Stops early once ``budget`` pieces do not
    suffice. With ``strict`` a forced one-step piece whose error already
    exceeds ``eps`` aborts with DEGENERATE; otherwise it is accepted.
    Returns ``(status, count, forced)``.
    """
    n = stop - start + 1
    ux = np.empty(n)
    uy = np.empty(n)
    lx = np.empty(n)
    ly = np.empty(n)
    knots[0] = start
    count = 0
    forced = 0
    s = start
    while True:
        if count == budget:
            return OVER_BUDGET, count, forced
        e = first_exceed(values, dt, s, stop, eps, degree, ux, uy, lx, ly)
        count += 1
        if e < 0:
            knots[count] = stop
            return FITS, count, forced
        end = e - 1
        if end == s:
            if strict:
                return DEGENERATE, count, forced
            forced += 1
            end = s + 1
        knots[count] = end
        if end == stop:
            return FITS, count, forced
        s = end


@nb.njit(cache=True, nogil=True)
def whole_error(values, dt, start, stop, degree):
    if degree == 0:
        return range_error(values, start, stop)[0]
    n = stop - start + 1
    ux = np.empty(n)
    uy = np.empty(n)
    lx = np.empty(n)
    ly = np.empty(n)
    return line_error(values, dt, start, stop, ux, uy, lx, ly)[0]


@nb.njit(cache=True, nogil=True)
def gamma_bisect(values, dt, start, stop, k, degree, rel_tol):
    """Smallest level (to ``rel_tol * E0``) at which ``k`` greedy pieces cover the window.

    Returns ``(gamma, lower, e0)``: ``gamma`` is feasible, ``lower`` is
    infeasible (or 0 when never probed).
    """
    e0 = whole_error(values, dt, start, stop, degree)
    if k == 1 or e0 == 0.0:
        return e0, 0.0, e0
    knots = np.empty(k + 2, dtype=np.int64)
    lo = 0.0
    hi = e0
    width = rel_tol * e0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        status, _, _ = greedy_pieces(values, dt, start, stop, mid, degree, k, True, knots)
        if status == FITS:
            hi = mid
        else:
            lo = mid
    return hi, lo, e0
