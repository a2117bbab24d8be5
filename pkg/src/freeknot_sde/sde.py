"""Scalar SDEs ``dX = a(t, X) dt + sigma(t) dW`` and their spline approximations.

Three methods are built from one Brownian path:

* ``dagger``: Euler scheme on a coarse grid of ``n = floor(k**delta)``
  cells, plus on every cell an optimal free-knot spline of the shifted
  Brownian motion with a piece budget proportional to ``sigma**2``;
* ``star``: the same with an equal budget per cell;
* ``euler``: the piecewise linear interpolation of the Euler scheme with
  step ``1/k``.

The strong solution is replaced by the Euler recursion on the full fine
grid driven by the same increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba as nb
import numpy as np
from numba.core.registry import CPUDispatcher

from .errors import ConfigurationError
from .freeknot import FreeKnotSpline, GammaResult, spline_on_array
from .minimax import PolynomialPiece
from .paths import PURPOSE_INITIAL, FineGrid, SamplePath, SeedSpec

DEFAULT_DELTA = 0.75


@dataclass(frozen=True, eq=False)
class AdditiveNoiseSde:
    """Drift ``a(t, x)``, diffusion ``sigma(t)`` and a sampler for ``X(0)``.

    ``diffusion`` must accept numpy arrays. A numba-compiled ``drift`` runs
    the fine-grid recursions in compiled code; plain callables work too,
    only slower. ``initial_sampler`` takes a numpy Generator, or is a
    constant.
    """

    drift: Callable[[float, float], float]
    diffusion: Callable[[np.ndarray], np.ndarray]
    initial_sampler: Callable[[np.random.Generator], float] | float = 0.0
    name: str = "custom"
    lipschitz_note: str = ""
    strict: bool = True
    check_points: int = field(default=1025, repr=False)

    def __post_init__(self):
        if self.strict:
            t = np.linspace(0.0, 1.0, self.check_points)
            s = self.sigma(t)
            if np.any(s == 0) or not np.all(np.isfinite(s)):
                raise ConfigurationError(f"sigma vanishes or is not finite on [0, 1] for {self.name!r}")

    def sigma(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return np.broadcast_to(np.asarray(self.diffusion(t), dtype=np.float64), t.shape).copy()

    def sample_initial(self, seed: SeedSpec | None = None) -> float:
        if callable(self.initial_sampler):
            if seed is None:
                raise ConfigurationError(f"{self.name!r} has a random initial value; pass a seed")
            return float(self.initial_sampler(seed.generator(PURPOSE_INITIAL)))
        return float(self.initial_sampler)


# -- presets ------------------------------------------------------------------


@nb.njit(cache=True)
def _zero_drift(t, x):
    return 0.0


@nb.njit(cache=True)
def _mean_reverting(t, x):
    return -x


@nb.njit(cache=True)
def _periodic_forcing(t, x):
    return math.sin(2.0 * math.pi * t) - x


def _unit(t):
    return np.ones_like(t)


def _ramp(t):
    return 1.0 + 2.0 * t


def _standard_normal(rng):
    return rng.standard_normal()


PRESETS = {
    "bm": AdditiveNoiseSde(_zero_drift, _unit, 0.0, "bm", "a = 0: every Lipschitz bound holds with K = 1"),
    "ou": AdditiveNoiseSde(_mean_reverting, _unit, 0.0, "ou", "a = -x: K = 1, a_x constant"),
    "ramp-sigma": AdditiveNoiseSde(
        _mean_reverting, _ramp, 0.0, "ramp-sigma", "a = -x: K = 1; sigma = 1 + 2t is 2-Lipschitz, >= 1"
    ),
    "time-drift": AdditiveNoiseSde(
        _periodic_forcing, _unit, _standard_normal, "time-drift",
        "a = sin(2 pi t) - x: K = 2 pi; X(0) ~ N(0, 1) has all moments",
    ),
}


def preset(name: str) -> AdditiveNoiseSde:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown SDE preset {name!r}; choose from {sorted(PRESETS)}") from None


# -- Euler recursions ---------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _euler_jit(w, dt, idx, x0, drift, sig):
    out = np.empty(idx.size)
    out[0] = x0
    for l in range(idx.size - 1):
        t = idx[l] * dt
        h = idx[l + 1] * dt - t
        out[l + 1] = out[l] + drift(t, out[l]) * h + sig[l] * (w[idx[l + 1]] - w[idx[l]])
    return out


def _euler_py(w, dt, idx, x0, drift, sig):
    out = np.empty(idx.size)
    out[0] = x0
    for l in range(idx.size - 1):
        t = idx[l] * dt
        h = idx[l + 1] * dt - t
        out[l + 1] = out[l] + drift(t, out[l]) * h + sig[l] * (w[idx[l + 1]] - w[idx[l]])
    return out


def euler_on_indices(sde: AdditiveNoiseSde, path: SamplePath, idx: np.ndarray, x0: float) -> np.ndarray:
    """Euler recursion at the fine-grid indices ``idx`` (increasing, idx[0] == 0)."""
    dt = path.grid.dt
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    sig = sde.sigma(idx * dt)
    run = _euler_jit if isinstance(sde.drift, CPUDispatcher) else _euler_py
    return run(path.values, dt, idx, float(x0), sde.drift, sig)


def _x0(sde, x0):
    return sde.sample_initial() if x0 is None else float(x0)


def reference_solution(sde: AdditiveNoiseSde, path: SamplePath, x0: float | None = None) -> SamplePath:
    """Euler scheme on every fine-grid step, used in place of the exact solution."""
    idx = np.arange(path.grid.points)
    return SamplePath(path.grid, euler_on_indices(sde, path, idx, _x0(sde, x0)))


def coarse_steps(k: int, delta: float = DEFAULT_DELTA) -> int:
    """``floor(k**delta)``, robust to ``k**delta`` landing just below an integer."""
    if not 0.5 < delta < 1:
        raise ConfigurationError(f"delta must lie in (1/2, 1), got {delta}")
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    v = k**delta
    n = round(v)
    return int(n if abs(v - n) < 1e-9 * max(1.0, v) else math.floor(v))


def coarse_indices(grid: FineGrid, n: int) -> np.ndarray:
    """Fine-grid indices nearest to ``l * T / n``."""
    if n < 1:
        raise ConfigurationError("need at least one coarse step")
    if n > grid.steps:
        raise ConfigurationError(f"{n} coarse steps do not fit on a grid with {grid.steps} steps")
    return np.rint(np.arange(n + 1) * (grid.steps / n)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class CoarseScheme:
    n: int
    indices: np.ndarray
    times: np.ndarray
    euler_values: np.ndarray
    sigma_values: np.ndarray


def euler_coarse(sde: AdditiveNoiseSde, path: SamplePath, k: int | None = None,
                 delta: float = DEFAULT_DELTA, x0: float | None = None, n: int | None = None) -> CoarseScheme:
    """Euler scheme on ``n = floor(k**delta)`` cells (or an explicit ``n``)."""
    if n is None:
        n = coarse_steps(k, delta)
    idx = coarse_indices(path.grid, n)
    times = idx * path.grid.dt
    vals = euler_on_indices(sde, path, idx, _x0(sde, x0))
    return CoarseScheme(n, idx, times, vals, sde.sigma(times[:-1]))


def xbar_process(sde: AdditiveNoiseSde, path: SamplePath, n: int, x0: float | None = None) -> SamplePath:
    """Coarse Euler values joined by frozen-coefficient Brownian increments.

    Equal to the coarse Euler scheme at the coarse times.
    """
    scheme = euler_coarse(sde, path, n=n, x0=x0)
    dt = path.grid.dt
    out = np.empty(path.grid.points)
    out[0] = scheme.euler_values[0]
    w = path.values
    for l in range(n):
        a, b = scheme.indices[l], scheme.indices[l + 1]
        t_l = a * dt
        xl = scheme.euler_values[l]
        drift = float(sde.drift(t_l, xl))
        i = np.arange(a + 1, b)
        out[a + 1 : b] = xl + drift * (i * dt - t_l) + scheme.sigma_values[l] * (w[a + 1 : b] - w[a])
        out[b] = scheme.euler_values[l + 1]
    return SamplePath(path.grid, out)


# -- knot budgets ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KnotBudget:
    k: int
    n: int
    m: np.ndarray
    delta: float | None = None

    @property
    def total_knots(self) -> int:
        """Breakpoints used: the ``n + 1`` coarse points plus the free interior knots."""
        return int(self.n + 1 + np.sum(self.m - 1))


def knot_budget(sigma_values, k: int, n: int, delta: float | None = None) -> KnotBudget:
    """Pieces per coarse cell, proportional to ``sigma_l**2``."""
    s2 = np.asarray(sigma_values, dtype=np.float64) ** 2
    if s2.size != n:
        raise ConfigurationError(f"need {n} sigma values, got {s2.size}")
    if k <= n or n < 1:
        raise ConfigurationError(f"need k > n >= 1, got k={k}, n={n}")
    if np.any(s2 == 0):
        raise ConfigurationError("sigma vanishes at a coarse point")
    m = np.floor(s2 * (k - n) / s2.sum()).astype(np.int64) + 1
    budget = KnotBudget(k, n, m, delta)
    if not k - n <= budget.total_knots <= k + 1:
        raise AssertionError(f"knot count {budget.total_knots} outside [{k - n}, {k + 1}]")
    return budget


def equal_budget(k: int, n: int, delta: float | None = None) -> KnotBudget:
    if k <= n or n < 1:
        raise ConfigurationError(f"need k > n >= 1, got k={k}, n={n}")
    return KnotBudget(k, n, np.full(n, (k - n) // n + 1, dtype=np.int64), delta)


# -- combined methods -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CombinedBuild:
    """A dagger/star spline with its per-cell diagnostics.

    ``cell_errors[l]`` is the grid sup-error of the Brownian spline on the
    half-open cell ``]t_l, t_{l+1}]``; ``cell_gammas[l]`` the level it was
    built at.
    """

    spline: FreeKnotSpline
    scheme: CoarseScheme
    budget: KnotBudget
    cell_gammas: np.ndarray
    cell_errors: np.ndarray
    cell_results: tuple[GammaResult, ...]


def build_combined(sde: AdditiveNoiseSde, path: SamplePath, k: int, delta: float = DEFAULT_DELTA,
                   r: int = 0, x0: float | None = None, allocation: str = "dagger",
                   rel_tol: float = 1e-3) -> CombinedBuild:
    x0 = _x0(sde, x0)
    scheme = euler_coarse(sde, path, k, delta, x0)
    n = scheme.n
    if allocation == "dagger":
        budget = knot_budget(scheme.sigma_values, k, n, delta)
    elif allocation == "star":
        budget = equal_budget(k, n, delta)
    else:
        raise ConfigurationError(f"unknown allocation {allocation!r}")
    dt = path.grid.dt
    w = path.values
    deg = max(r, 1)
    pieces, knots = [], [0]
    gammas = np.empty(n)
    errors = np.empty(n)
    results = []
    for l in range(n):
        a, b = int(scheme.indices[l]), int(scheme.indices[l + 1])
        cell = w[a : b + 1] - w[a]
        bm_spline, res = spline_on_array(cell, dt, 0, b - a, int(budget.m[l]), r, rel_tol)
        gammas[l] = res.gamma
        results.append(res)
        errors[l] = np.max(np.abs(cell[1:] - bm_spline.grid_values(b - a)[1:]))
        xl = scheme.euler_values[l]
        sl = scheme.sigma_values[l]
        drift = float(sde.drift(a * dt, xl))
        for p in bm_spline.pieces:
            plo, phi = p.interval
            c = np.zeros(deg + 1)
            c[: len(p.coefficients)] = sl * np.asarray(p.coefficients)
            c[0] += xl + drift * (plo * dt)
            c[1] += drift
            lo_abs, hi_abs = a + plo, a + phi
            pieces.append(PolynomialPiece((lo_abs, hi_abs), lo_abs * dt, hi_abs * dt,
                                          tuple(float(v) for v in c), deg, abs(float(sl)) * p.sup_error))
            knots.append(hi_abs)
    knots = np.asarray(knots, dtype=np.int64)
    spline = FreeKnotSpline(knots * dt, tuple(pieces), deg, knot_indices=knots, dt=dt, value_at_start=x0)
    return CombinedBuild(spline, scheme, budget, gammas, errors, tuple(results))


def build_dagger(sde, path, k, delta=DEFAULT_DELTA, r=0, x0=None, rel_tol=1e-3) -> FreeKnotSpline:
    """Coarse Euler plus sigma**2-proportional optimal Brownian splines."""
    return build_combined(sde, path, k, delta, r, x0, "dagger", rel_tol).spline


def build_star(sde, path, k, delta=DEFAULT_DELTA, r=0, x0=None, rel_tol=1e-3) -> FreeKnotSpline:
    """Coarse Euler plus optimal Brownian splines with equal budgets per cell."""
    return build_combined(sde, path, k, delta, r, x0, "star", rel_tol).spline


def build_euler_interp(sde: AdditiveNoiseSde, path: SamplePath, k: int, x0: float | None = None) -> FreeKnotSpline:
    """Piecewise linear interpolation of the Euler scheme with step ``1/k``."""
    scheme = euler_coarse(sde, path, n=k, x0=x0)
    dt = path.grid.dt
    idx, vals = scheme.indices, scheme.euler_values
    pieces = []
    for l in range(k):
        a, b = int(idx[l]), int(idx[l + 1])
        slope = (vals[l + 1] - vals[l]) / ((b - a) * dt)
        pieces.append(PolynomialPiece((a, b), a * dt, b * dt, (float(vals[l]), float(slope)), 1, 0.0))
    return FreeKnotSpline(idx * dt, tuple(pieces), 1, knot_indices=idx, dt=dt, knot_values=vals)


def sigma_norms(sde: AdditiveNoiseSde, horizon: float = 1.0) -> tuple[float, float]:
    """``(||sigma||_2, ||sigma||_inf)`` on ``[0, horizon]``.

    The L2 norm uses adaptive Gauss-Kronrod quadrature; the sup norm a
    dense grid refined by a bounded scalar search around the best point.
    """
    from scipy.integrate import quad
    from scipy.optimize import minimize_scalar

    l2 = math.sqrt(quad(lambda t: float(sde.sigma(t)) ** 2, 0.0, horizon, epsabs=1e-12, epsrel=1e-10, limit=200)[0])
    t = np.linspace(0.0, horizon, 100_001)
    s = np.abs(sde.sigma(t))
    i = int(np.argmax(s))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
    best = float(s[i])
    if hi > lo:
        opt = minimize_scalar(lambda u: -abs(float(sde.sigma(u))), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(opt.fun))
    return l2, best
