"""Best uniform (minimax) polynomial fits on finite point sets.

Degree 0 is the midrange, degree 1 comes from the upper and lower convex
hulls, and higher degrees use a single-point exchange (discrete Remez)
iteration. :func:`lp_oracle_best_poly` solves the same problem as a linear
program and exists to check the fast paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from numpy.polynomial import chebyshev as C

from . import _kernels as K
from .errors import OracleError
from .paths import SamplePath


@dataclass(frozen=True)
class PolynomialPiece:
    """A polynomial of degree <= ``degree_bound`` in powers of ``t - t_left``.

    ``interval`` holds the first and last sample index the piece was
    fitted on; ``sup_error`` is the max deviation over those samples.
    """

    interval: tuple[int, int]
    t_left: float
    t_right: float
    coefficients: tuple[float, ...]
    degree_bound: int
    sup_error: float

    def __post_init__(self):
        if len(self.coefficients) != self.degree_bound + 1:
            raise ValueError("need degree_bound + 1 coefficients")
        if self.interval[0] > self.interval[1]:
            raise ValueError("interval must satisfy left <= right")

    def __call__(self, t):
        return eval_piece(self, t)


def eval_piece(piece: PolynomialPiece, t):
    """Horner evaluation; ``t`` may be a scalar or an array."""
    x = np.asarray(t, dtype=np.float64) - piece.t_left
    acc = np.zeros_like(x) + piece.coefficients[-1]
    for c in piece.coefficients[-2::-1]:
        acc = acc * x + c
    return acc if acc.ndim else float(acc)


def horner(coefficients, x):
    acc = np.zeros_like(x) + coefficients[-1]
    for c in coefficients[-2::-1]:
        acc = acc * x + c
    return acc


def _pad(coefficients, r):
    out = np.zeros(r + 1)
    m = min(len(coefficients), r + 1)
    out[:m] = coefficients[:m]
    return out


def _fit_local(x: np.ndarray, v: np.ndarray, r: int, reference=None):
    """Minimax fit in the local abscissa ``x`` (x[0] == 0).

    Returns ``(coefficients, sup_error, reference)``.
    """
    n = x.size
    # errors are recomputed from the coefficients, not taken from the geometry
    if r == 0 or n == 1:
        mid = 0.5 * (v.min() + v.max())
        return _pad([mid], r), float(np.max(np.abs(v - mid))), None
    if r == 1:
        _, slope, offset = K.line_fit_xy(x, v)
        coef = np.array([offset, slope])
        return coef, float(np.max(np.abs(v - horner(coef, x)))), None
    if n <= r + 1:
        coef = Polynomial.fit(x, v, n - 1, domain=[x[0], x[-1]], window=[-1, 1]).convert().coef
        coef = _pad(coef, r)
        return coef, float(np.max(np.abs(v - horner(coef, x)))), None
    coef, ref = remez_discrete(x, v, r, reference)
    return coef, float(np.max(np.abs(v - horner(coef, x)))), ref


def _initial_reference(n: int, r: int) -> np.ndarray:
    # Chebyshev extrema of [-1, 1] mapped onto sample positions
    z = -np.cos(np.pi * np.arange(r + 2) / (r + 1))
    ref = np.rint((z + 1) / 2 * (n - 1)).astype(int)
    for i in range(1, ref.size):
        ref[i] = max(ref[i], ref[i - 1] + 1)
    for i in range(ref.size - 2, -1, -1):
        ref[i] = min(ref[i], ref[i + 1] - 1)
    return ref


def remez_discrete(x: np.ndarray, v: np.ndarray, r: int, reference=None, max_iter: int = 500):
    """Single-point exchange for the discrete minimax problem.

    Solves the levelled system on ``r + 2`` reference points, then swaps in
    the worst sample while keeping the sign alternation. The levelled error
    grows strictly, so the loop terminates for points in general position.
    Returns monomial coefficients in ``x`` and the final reference indices.
    """
    n = x.size
    span = x[-1] - x[0]
    z = 2.0 * (x - x[0]) / span - 1.0
    V = C.chebvander(z, r)
    signs = (-1.0) ** np.arange(r + 2)
    ref = _initial_reference(n, r) if reference is None else np.array(reference, dtype=int)
    scale = max(np.max(np.abs(v)), 1e-300)
    for _ in range(max_iter):
        A = np.column_stack([V[ref], signs])
        sol = np.linalg.solve(A, v[ref])
        cheb, h = sol[:-1], sol[-1]
        res = v - V @ cheb
        j = int(np.argmax(np.abs(res)))
        if np.abs(res[j]) <= np.abs(h) * (1 + 1e-13) + 1e-15 * scale or j in ref:
            break
        ref = _exchange(ref, j, res)
    else:
        raise RuntimeError("discrete exchange did not converge")
    coef = Chebyshev(cheb, domain=[x[0], x[-1]]).convert(kind=Polynomial).coef
    return _pad(coef, r), ref


def _exchange(ref: np.ndarray, j: int, res: np.ndarray) -> np.ndarray:
    sj = np.sign(res[j])
    ref = ref.copy()
    if j < ref[0]:
        if np.sign(res[ref[0]]) == sj:
            ref[0] = j
        else:
            ref = np.concatenate([[j], ref[:-1]])
    elif j > ref[-1]:
        if np.sign(res[ref[-1]]) == sj:
            ref[-1] = j
        else:
            ref = np.concatenate([ref[1:], [j]])
    else:
        i = int(np.searchsorted(ref, j)) - 1
        if np.sign(res[ref[i]]) == sj:
            ref[i] = j
        else:
            ref[i + 1] = j
    return ref


def best_poly(times, values, r: int, index_offset: int = 0) -> PolynomialPiece:
    """Best degree <= ``r`` polynomial for the samples ``(times, values)``."""
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.size == 0:
        raise ValueError("cannot fit an empty sample set")
    if r < 0:
        raise ValueError("degree bound must be nonnegative")
    coef, err, _ = _fit_local(t - t[0], v, r)
    return PolynomialPiece(
        (index_offset, index_offset + t.size - 1), float(t[0]), float(t[-1]),
        tuple(float(c) for c in coef), r, float(err),
    )


def fit_window(path: SamplePath, lo: int, hi: int, r: int) -> PolynomialPiece:
    """Best fit to ``path`` on the grid indices ``lo..hi`` (inclusive)."""
    if not 0 <= lo <= hi <= path.grid.steps:
        raise ValueError(f"bad window [{lo}, {hi}]")
    dt = path.grid.dt
    x = np.arange(hi - lo + 1) * dt
    coef, err, _ = _fit_local(x, path.values[lo : hi + 1], r)
    return PolynomialPiece(
        (lo, hi), lo * dt, hi * dt, tuple(float(c) for c in coef), r, float(err)
    )


def window_error(path: SamplePath, lo: int, hi: int, r: int) -> float:
    if r <= 1:
        return float(K.whole_error(path.values, path.grid.dt, lo, hi, r))
    return fit_window(path, lo, hi, r).sup_error


def lp_oracle_best_poly(times, values, r: int) -> PolynomialPiece:
    """Discrete minimax fit as a linear program (HiGHS dual simplex).

    minimize e  subject to  -e <= v_i - sum_j c_j x_i^j <= e.
    The vertex returned by the simplex is recomputed exactly from its
    coefficients, so the error is not limited by the solver's tolerances.
    """
    from scipy.optimize import linprog

    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.size == 0:
        raise ValueError("cannot fit an empty sample set")
    x = t - t[0]
    span = x[-1] if x[-1] > 0 else 1.0
    u = x / span
    if r >= t.size - 1:
        # as many coefficients as samples: interpolate, pad with zeros
        c = np.linalg.solve(np.vander(u, t.size, increasing=True), v)
        coef = _pad(c / span ** np.arange(t.size), r)
        err = float(np.max(np.abs(v - horner(coef, x))))
        return PolynomialPiece((0, t.size - 1), float(t[0]), float(t[-1]),
                               tuple(float(c) for c in coef), r, err)
    P = np.vander(u, r + 1, increasing=True)
    ones = np.ones((t.size, 1))
    A_ub = np.vstack([np.hstack([-P, -ones]), np.hstack([P, -ones])])
    b_ub = np.concatenate([-v, v])
    cost = np.zeros(r + 2)
    cost[-1] = 1.0
    bounds = [(None, None)] * (r + 1) + [(0, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise OracleError(f"LP oracle failed: {res.message}")
    c = _polish(P, v, res)
    coef = c / span ** np.arange(r + 1)
    err = float(np.max(np.abs(v - horner(coef, x))))
    return PolynomialPiece((0, t.size - 1), float(t[0]), float(t[-1]),
                           tuple(float(c) for c in coef), r, err)


def _polish(P, v, res):
    """Re-solve the LP's optimal basis exactly.

    The nonzero duals mark ``r + 2`` active constraints ``v_i - p(x_i) = s_i e``;
    solving that square system removes the solver's feasibility slack.
    Falls back to the raw LP point if the basis is degenerate or the
    polished point is no better.
    """
    n, m = P.shape
    c_lp = res.x[:m]
    duals = res.ineqlin.marginals
    active = np.flatnonzero(np.abs(duals) > 1e-12)
    if active.size != m + 1:
        return c_lp
    rows = active % n
    signs = np.where(active < n, -1.0, 1.0)
    A = np.hstack([P[rows], signs[:, None]])
    try:
        sol = np.linalg.solve(A, v[rows])
    except np.linalg.LinAlgError:
        return c_lp
    c = sol[:m]
    if np.max(np.abs(v - P @ c)) <= np.max(np.abs(v - P @ c_lp)):
        return c
    return c_lp


def equioscillation_count(residuals, sup_error: float, rel_tol: float = 1e-9) -> int:
    """Length of the longest sign-alternating run of near-extremal residuals."""
    res = np.asarray(residuals, dtype=np.float64)
    if sup_error == 0:
        return 0
    mask = np.abs(res) >= sup_error * (1 - rel_tol)
    signs = np.sign(res[mask])
    if signs.size == 0:
        return 0
    return 1 + int(np.count_nonzero(signs[1:] != signs[:-1]))


def minimax_error_prefix_scan(path: SamplePath, start_index: int, r: int, eps: float,
                              stop_index: int | None = None) -> int | None:
    """Smallest ``e > start_index`` whose fit on ``[start_index, e]`` has error > ``eps``.

    Returns None when the error stays <= ``eps`` up to ``stop_index``
    (default: the end of the grid).
    """
    stop = path.grid.steps if stop_index is None else stop_index
    if not 0 <= start_index < stop <= path.grid.steps:
        raise ValueError(f"need 0 <= start < stop <= {path.grid.steps}")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if r <= 1:
        n = stop - start_index + 1
        bufs = [np.empty(n) for _ in range(4)]
        e = K.first_exceed(path.values, path.grid.dt, start_index, stop, eps, r, *bufs)
        return None if e < 0 else int(e)
    return _probe_scan(path, start_index, stop, r, eps)


def _probe_scan(path, start, stop, r, eps):
    # the error is nondecreasing in the right end: double, then bisect
    ok = start
    step = max(r + 1, 1)
    bad = None
    while bad is None:
        probe = min(start + step, stop)
        if window_error(path, start, probe, r) > eps:
            bad = probe
        else:
            ok = probe
            if probe == stop:
                return None
            step *= 2
    while bad - ok > 1:
        mid = (ok + bad) // 2
        if window_error(path, start, mid, r) > eps:
            bad = mid
        else:
            ok = mid
    return bad


class ApproxWorkspace:
    """Incremental minimax error of a growing prefix of samples.

    ``append`` adds one sample and returns the best error on everything
    appended so far.
    """

    def __init__(self, r: int, capacity: int = 64):
        self.r = r
        self.error = 0.0
        self._n = 0
        self._x0 = 0.0
        if r == 0:
            self._lo = np.inf
            self._hi = -np.inf
        elif r == 1:
            self._hulls = [np.empty(capacity) for _ in range(4)]
            self._nu = self._nl = 0
        else:
            self._t = []
            self._v = []
            self.reference = None

    def __len__(self):
        return self._n

    def append(self, t: float, v: float) -> float:
        if self._n == 0:
            self._x0 = t
        x = t - self._x0
        self._n += 1
        if self.r == 0:
            self._lo = min(self._lo, v)
            self._hi = max(self._hi, v)
            self.error = 0.5 * (self._hi - self._lo)
        elif self.r == 1:
            if self._n > self._hulls[0].size:
                self._hulls = [np.concatenate([h, np.empty_like(h)]) for h in self._hulls]
            ux, uy, lx, ly = self._hulls
            self._nu = K.hull_push(ux, uy, self._nu, x, v, True)
            self._nl = K.hull_push(lx, ly, self._nl, x, v, False)
            self.error = K.strip_fit(ux, uy, self._nu, lx, ly, self._nl)[0]
        else:
            self._t.append(x)
            self._v.append(v)
            xs, vs = np.array(self._t), np.array(self._v)
            ref = None
            if self.reference is not None and self._n > self.r + 2:
                ref = self.reference
            _, self.error, new_ref = _fit_local(xs, vs, self.r, ref)
            self.reference = new_ref
        return self.error
