"""Free-knot splines on sampled paths.

A stopping sequence at level ``eps`` splits a window of the grid into
maximal pieces, each fitted by a polynomial of degree <= r with grid
sup-error <= eps. Pieces share their boundary index: a stopping index is
the last grid point at which the piece still fits, and the next piece
starts there. The pathwise minimal error for ``k`` pieces is the smallest
level whose greedy cover uses at most ``k`` pieces.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import CensoringError, ConfigurationError
from .minimax import PolynomialPiece, _fit_local, _probe_scan, horner
from .paths import FineGrid, SamplePath, SeedSpec, wiener_increments

log = logging.getLogger(__name__)

_ROUNDOFF = 64 * np.finfo(np.float64).eps


@dataclass(frozen=True, eq=False)
class StoppingSequence:
    """Boundaries ``taus[0] < taus[1] < ...`` of the greedy pieces (grid indices)."""

    epsilon: float
    taus: np.ndarray
    exhausted: bool
    degree: int
    forced: int = 0

    @property
    def pieces(self) -> int:
        return self.taus.size - 1

    def xi(self, dt: float) -> np.ndarray:
        return np.diff(self.taus) * dt


@dataclass(frozen=True)
class GammaResult:
    gamma: float
    pieces_at_gamma: int
    tolerance: float
    whole_error: float


@dataclass(frozen=True, eq=False)
class FreeKnotSpline:
    """Piecewise polynomial; piece ``j`` is live on ``]breakpoints[j], breakpoints[j+1]]``.

    ``knot_indices`` are the breakpoints as fine-grid indices (when the
    spline was built on a grid with step ``dt``). ``value_at_start``
    overrides the left-limit convention at the first breakpoint;
    ``knot_values``, if given, pins the value at every breakpoint (used by
    interpolants, whose Horner evaluation at the right end may be off by
    an ulp).
    """

    breakpoints: np.ndarray
    pieces: tuple[PolynomialPiece, ...]
    degree_bound: int
    knot_indices: np.ndarray | None = None
    dt: float | None = None
    value_at_start: float | None = None
    knot_values: np.ndarray | None = None
    _coefs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=np.float64)
        object.__setattr__(self, "breakpoints", bp)
        if len(self.pieces) != bp.size - 1:
            raise ValueError("need exactly one piece per breakpoint interval")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        coefs = np.zeros((len(self.pieces), self.degree_bound + 1))
        for j, p in enumerate(self.pieces):
            coefs[j, : len(p.coefficients)] = p.coefficients
        object.__setattr__(self, "_coefs", coefs)

    @property
    def knots(self) -> int:
        return self.breakpoints.size

    def __call__(self, t):
        return eval_spline(self, t)

    def grid_values(self, steps: int) -> np.ndarray:
        """Values at fine-grid indices ``0..steps`` (needs ``knot_indices``)."""
        ki = self.knot_indices
        if ki is None or ki[0] != 0 or ki[-1] != steps:
            raise ValueError("spline is not anchored on this grid")
        idx = np.arange(steps + 1)
        # piece j covers ]ki[j], ki[j+1]]; index 0 belongs to piece 0
        owner = np.repeat(np.arange(len(self.pieces)), np.diff(ki))
        owner = np.concatenate([[0], owner])
        left = np.array([p.interval[0] for p in self.pieces])[owner]
        x = (idx - left) * self.dt
        coefs = self._coefs[owner]
        out = horner_rows(coefs, x)
        if self.knot_values is not None:
            out[ki] = self.knot_values
        if self.value_at_start is not None:
            out[0] = self.value_at_start
        return out


def horner_rows(coefs: np.ndarray, x: np.ndarray) -> np.ndarray:
    acc = coefs[:, -1].copy()
    for j in range(coefs.shape[1] - 2, -1, -1):
        acc = acc * x + coefs[:, j]
    return acc


def eval_spline(spline: FreeKnotSpline, t):
    """Evaluate at ``t`` (scalar or array) with the half-open piece convention."""
    tt = np.asarray(t, dtype=np.float64)
    bp = spline.breakpoints
    if np.any(tt < bp[0]) or np.any(tt > bp[-1]):
        raise ValueError(f"t outside [{bp[0]}, {bp[-1]}]")
    j = np.clip(np.searchsorted(bp, tt, side="left") - 1, 0, len(spline.pieces) - 1)
    left = np.array([p.t_left for p in spline.pieces])[j]
    out = horner_rows(spline._coefs[np.atleast_1d(j)], np.atleast_1d(tt - left))
    if spline.knot_values is not None:
        at = np.searchsorted(bp, np.atleast_1d(tt))
        hit = bp[np.minimum(at, bp.size - 1)] == np.atleast_1d(tt)
        out = np.where(hit, spline.knot_values[np.minimum(at, bp.size - 1)], out)
    if spline.value_at_start is not None:
        out = np.where(np.atleast_1d(tt) == bp[0], spline.value_at_start, out)
    return out.reshape(tt.shape) if tt.ndim else float(out[0])


def sup_distance(spline: FreeKnotSpline, path: SamplePath) -> float:
    return float(np.max(np.abs(path.values - spline.grid_values(path.grid.steps))))


# -- array-level machinery shared with the SDE builders ----------------------


def _window(path: SamplePath, interval):
    lo, hi = (0, path.grid.steps) if interval is None else interval
    if not 0 <= lo < hi <= path.grid.steps:
        raise ValueError(f"bad interval [{lo}, {hi}] for a grid with {path.grid.steps} steps")
    return int(lo), int(hi)


def greedy_taus(values, dt, lo, hi, eps, r, budget=None, strict=False):
    """Run the greedy cover; returns ``(status, taus, forced)``."""
    if r <= 1:
        budget = hi - lo if budget is None else budget
        knots = np.empty(min(budget, hi - lo) + 2, dtype=np.int64)
        status, count, forced = K.greedy_pieces(values, dt, lo, hi, eps, r, budget, strict, knots)
        return status, knots[: count + 1].copy(), forced
    return _greedy_general(values, dt, lo, hi, eps, r, budget, strict)


def _greedy_general(values, dt, lo, hi, eps, r, budget, strict):
    path = SamplePath(FineGrid(values.size - 1, (values.size - 1) * dt), values)
    taus = [lo]
    forced = 0
    s = lo
    while True:
        if budget is not None and len(taus) - 1 == budget:
            return K.OVER_BUDGET, np.array(taus), forced
        e = _probe_scan(path, s, hi, r, eps)
        if e is None:
            taus.append(hi)
            return K.FITS, np.array(taus), forced
        end = e - 1
        if end == s:
            if strict:
                return K.DEGENERATE, np.array(taus), forced
            forced += 1
            end = s + 1
        taus.append(end)
        if end == hi:
            return K.FITS, np.array(taus), forced
        s = end


def _whole_error(values, dt, lo, hi, r):
    if r <= 1:
        return float(K.whole_error(values, dt, lo, hi, r))
    x = np.arange(hi - lo + 1) * dt
    return _fit_local(x, values[lo : hi + 1], r)[1]


def gamma_on_array(values, dt, lo, hi, k, r, rel_tol=1e-3):
    if k < 1:
        raise ConfigurationError("piece budget k must be >= 1")
    steps = hi - lo
    if k >= steps + 1:
        log.warning("budget k=%d covers every grid point of the window; result is degenerate", k)
    if r >= 1 and k >= steps:
        # one-step pieces interpolate both end points
        return GammaResult(0.0, steps, 0.0, _whole_error(values, dt, lo, hi, r))
    e0 = _whole_error(values, dt, lo, hi, r)
    if e0 <= _ROUNDOFF * max(1.0, float(np.max(np.abs(values[lo : hi + 1])))):
        # the window is a polynomial up to rounding: one piece is exact
        return GammaResult(e0, 1, 0.0, e0)
    if r <= 1:
        gamma, lower, e0 = K.gamma_bisect(values, dt, lo, hi, k, r, rel_tol)
    else:
        gamma, lower = e0, 0.0
        if k > 1 and e0 > 0:
            while gamma - lower > rel_tol * e0:
                mid = 0.5 * (gamma + lower)
                status, _, _ = _greedy_general(values, dt, lo, hi, mid, r, k, True)
                if status == K.FITS:
                    gamma = mid
                else:
                    lower = mid
    if gamma == e0:
        return GammaResult(float(e0), 1, 0.5 * float(gamma - lower), float(e0))
    _, taus, _ = greedy_taus(values, dt, lo, hi, gamma, r, budget=k, strict=True)
    return GammaResult(float(gamma), taus.size - 1, 0.5 * float(gamma - lower), float(e0))


def spline_on_array(values, dt, lo, hi, k, r, rel_tol=1e-3):
    """Optimal ``k``-piece spline of ``values[lo..hi]`` plus its GammaResult."""
    res = gamma_on_array(values, dt, lo, hi, k, r, rel_tol)
    if res.pieces_at_gamma == 1:
        taus = np.array([lo, hi])
    elif res.gamma == 0.0:
        taus = np.arange(lo, hi + 1)
    else:
        status, taus, _ = greedy_taus(values, dt, lo, hi, res.gamma, r, budget=k, strict=True)
        if status != K.FITS:
            raise RuntimeError("greedy cover does not fit at the computed level")
    pieces = []
    for a, b in zip(taus[:-1], taus[1:]):
        x = np.arange(b - a + 1) * dt
        coef, err, _ = _fit_local(x, values[a : b + 1], r)
        pieces.append(PolynomialPiece((int(a), int(b)), a * dt, b * dt,
                                      tuple(float(c) for c in coef), r, float(err)))
    spline = FreeKnotSpline(taus * dt, tuple(pieces), r, knot_indices=taus, dt=dt)
    worst = max(p.sup_error for p in pieces)
    if worst > res.gamma:
        # recomputed residuals may sit an ulp above the scan's error measure
        res = dataclasses.replace(res, gamma=worst)
    return spline, res


# -- public operations --------------------------------------------------------


def stopping_times(path: SamplePath, eps: float, r: int, interval=None) -> StoppingSequence:
    """Greedy stopping indices at level ``eps`` on ``interval`` (default: whole grid).

    Below the one-step resolution a degree 0 piece cannot meet ``eps``;
    such pieces advance by one grid step and are counted in ``forced``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    lo, hi = _window(path, interval)
    status, taus, forced = greedy_taus(path.values, path.grid.dt, lo, hi, eps, r)
    last = _whole_error(path.values, path.grid.dt, taus[-2], taus[-1], r)
    return StoppingSequence(eps, taus, bool(last <= eps), r, forced)


def gamma_k(path: SamplePath, k: int, r: int, interval=None, rel_tol: float = 1e-3) -> GammaResult:
    """Pathwise minimal sup-error with ``k`` pieces, by bisection on the level."""
    lo, hi = _window(path, interval)
    return gamma_on_array(path.values, path.grid.dt, lo, hi, k, r, rel_tol)


def optimal_spline(path: SamplePath, k: int, r: int, interval=None, rel_tol: float = 1e-3) -> FreeKnotSpline:
    lo, hi = _window(path, interval)
    return spline_on_array(path.values, path.grid.dt, lo, hi, k, r, rel_tol)[0]


@dataclass(frozen=True, eq=False)
class XiSamples:
    """First stopping times ``tau_{1,eps}`` of independent Wiener paths (time units)."""

    epsilon: float
    degree: int
    values: np.ndarray
    censored: np.ndarray
    dt: float

    @property
    def censoring_rate(self) -> float:
        return float(np.mean(self.censored))

    @property
    def observed(self) -> np.ndarray:
        return self.values[~self.censored]


def first_stopping_time(r: int, eps: float, grid: FineGrid, seed: SeedSpec,
                        max_doublings: int = 6, first_block: int = 8192):
    """``tau_{1,eps}`` of one Wiener path, or ``None`` if censored.

    The path lives on ``grid`` scaled by ``eps**2`` in time and is simulated
    lazily: increments are drawn in blocks from the seeded stream until the
    first piece closes, up to ``2**max_doublings`` times the initial
    horizon (same step size). The simulated prefix equals
    :func:`~freeknot_sde.paths.sample_wiener` on the extended grid bit-for-bit.
    Returns ``(tau, simulated_steps)``.
    """
    g = FineGrid(grid.steps, grid.horizon * eps * eps)
    rng = seed.generator()
    cap = g.steps << max_doublings
    buf = np.empty(min(cap, g.steps) + 1)
    buf[0] = 0.0
    scan = _IncrementalScan(r, eps, g.dt)
    have = 0
    block = min(first_block, cap)
    while True:
        if have + block >= buf.size:
            buf = np.concatenate([buf, np.empty(max(buf.size, block))])
        inc = wiener_increments(g, rng, block)
        inc[0] += buf[have]
        np.cumsum(inc, out=buf[have + 1:have + 1 + block])
        e = scan.advance(buf, have, have + block)
        have += block
        if e is not None:
            return e * g.dt, have
        if have >= cap:
            return None, have
        # growth by a quarter keeps the overshoot past tau small
        block = min(max(first_block, have // 4), cap - have)


class _IncrementalScan:
    """First exceedance of ``eps`` by the fit on ``[0, i]`` over data arriving in blocks."""

    def __init__(self, r, eps, dt):
        self.r, self.eps, self.dt = r, eps, dt
        self.state = np.zeros(5)
        self.hulls = None

    def advance(self, values, last, stop):
        """Scan indices ``last + 1 .. stop`` given that ``0 .. last`` were scanned already."""
        if self.r == 0:
            e = K.range_scan_resume(values, last, stop, self.eps, self.state)
        elif self.r == 1:
            if self.hulls is None or self.hulls[0].size < values.size:
                grown = [np.empty(values.size) for _ in range(4)]
                if self.hulls is not None:
                    for new, old in zip(grown, self.hulls):
                        new[:old.size] = old
                self.hulls = grown
            e = K.line_scan_resume(values, self.dt, 0, last, stop, self.eps, *self.hulls, self.state)
        else:
            e = _first_exceed(values[:stop + 1], self.dt, self.r, self.eps)
        return None if e < 0 else int(e)


def _first_exceed(values, dt, r, eps):
    hi = values.size - 1
    path = SamplePath(FineGrid(hi, hi * dt), values)
    e = _probe_scan(path, 0, hi, r, eps)
    return -1 if e is None else e


def xi_samples(r: int, eps: float, n_samples: int, grid: FineGrid, seed: SeedSpec,
               max_censoring: float = 0.01, max_doublings: int = 6) -> XiSamples:
    """``tau_{1,eps}`` for ``n_samples`` independent streams starting at ``seed``.

    ``grid`` describes the level-1 simulation (steps and initial horizon);
    at level ``eps`` the horizon is scaled by ``eps**2``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    vals = np.empty(n_samples)
    cens = np.zeros(n_samples, dtype=bool)
    for i in range(n_samples):
        tau, _ = first_stopping_time(r, eps, grid, seed.child(i), max_doublings)
        if tau is None:
            cens[i] = True
            vals[i] = np.nan
        else:
            vals[i] = tau
    out = XiSamples(eps, r, vals, cens, grid.dt * eps * eps)
    if out.censoring_rate >= max_censoring:
        raise CensoringError(
            f"{out.censoring_rate:.2%} of the paths ran past the horizon cap; "
            "raise the initial horizon or max_doublings"
        )
    return out


def scaled_gamma(gamma: float, tau_mean: float, k: int) -> float:
    return gamma * math.sqrt(tau_mean * k)
