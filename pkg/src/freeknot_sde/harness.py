"""Monte Carlo estimators and convergence studies.

Every replication ``i`` uses the stream ``SeedSpec(master_seed, i)``;
results are collected in stream order, so the thread count never changes
an output byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .freeknot import gamma_k, xi_samples
from .paths import FineGrid, SeedSpec, sample_wiener
from .sde import (DEFAULT_DELTA, AdditiveNoiseSde, build_dagger, build_euler_interp, build_star,
                  preset, reference_solution, sigma_norms)

METHODS = ("dagger", "star", "euler")
SURROGATE_TAG = "dagger-as-min-surrogate"
# streams for the tau estimate sit far above any replication index
TAU_STREAM_OFFSET = 1 << 40
TAU_GRID_EXPONENT = 18
TAU_HORIZON = 8.0

TAU_HEADER = ("r", "n_samples", "m", "estimate", "std_error", "censoring_rate")
CONVERGE_HEADER = ("method", "k", "q", "n_paths", "e_q_hat", "std_error",
                   "sqrt_k_times_eq", "predicted_constant", "ratio")
GAMMA_HEADER = ("k", "r", "n_paths", "median_gamma", "scaled_median")
COMPARE_HEADER = ("method", "k", "q", "n_paths", "e_q_hat", "std_error",
                  "ratio_to_reference", "predicted_ratio")


def parallel_map(fn, items, threads: int = 1):
    """``list(map(fn, items))``, optionally on a thread pool (order preserved)."""
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=None if threads == 0 else threads) as pool:
        return list(pool.map(fn, items))


# -- tau moments ----------------------------------------------------------------


@dataclass(frozen=True)
class TauStats:
    r: int
    n_samples: int
    moment_estimates: tuple[float, ...]
    std_errors: tuple[float, ...]
    censoring_rate: float

    @property
    def mean(self) -> float:
        return self.moment_estimates[0]

    @property
    def mean_std_error(self) -> float:
        return self.std_errors[0]

    def rows(self):
        for m, (est, se) in enumerate(zip(self.moment_estimates, self.std_errors), start=1):
            yield (self.r, self.n_samples, m, est, se, self.censoring_rate)


def jackknife_moment(x: np.ndarray, m: int) -> tuple[float, float]:
    xm = x**m
    n = xm.size
    loo = (xm.sum() - xm) / (n - 1)
    est = float(xm.mean())
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return est, se


def estimate_tau_moments(r: int, n_samples: int, grid: FineGrid | None = None,
                         seed: SeedSpec | int = 0, max_moment: int = 4) -> TauStats:
    """Moments of ``tau_{1,1}`` from ``n_samples`` lazily simulated Wiener paths.

    ``grid`` is the initial simulation grid at level 1 (default ``2**18``
    steps on ``[0, 8]``); censored paths are extended by horizon doubling.
    """
    if n_samples < 100:
        raise ConfigurationError("need at least 100 samples for moment estimates")
    grid = grid or FineGrid.from_exponent(TAU_GRID_EXPONENT, TAU_HORIZON)
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)
    xs = xi_samples(r, 1.0, n_samples, grid, seed)
    obs = xs.observed
    est, se = zip(*(jackknife_moment(obs, m) for m in range(1, max_moment + 1)))
    return TauStats(r, n_samples, tuple(est), tuple(se), xs.censoring_rate)


# -- error estimates ------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorEstimate:
    method: str
    k: int
    q: float
    n_paths: int
    e_q_hat: float
    std_error: float

    @property
    def scaled(self) -> float:
        return math.sqrt(self.k) * self.e_q_hat


def power_mean(errors: np.ndarray, q: float) -> tuple[float, float]:
    """``(mean(errors**q))**(1/q)`` and its delta-method standard error."""
    e = np.asarray(errors, dtype=np.float64)
    scale = float(e.max()) if e.size else 0.0
    if scale == 0.0:
        return 0.0, 0.0
    # scaling by the largest error keeps e**q away from under- and overflow
    p = (e / scale) ** q
    mean = float(p.mean())
    est = scale * mean ** (1.0 / q)
    if p.size < 2:
        return est, 0.0
    se_mean = float(p.std(ddof=1)) / math.sqrt(p.size)
    return est, est / (q * mean) * se_mean


def _resolve_sde(sde) -> AdditiveNoiseSde:
    return preset(sde) if isinstance(sde, str) else sde


def _build(method, sde, path, k, delta, r, x0):
    if method in ("dagger", "min"):
        return build_dagger(sde, path, k, delta, r, x0)
    if method == "star":
        return build_star(sde, path, k, delta, r, x0)
    if method == "euler":
        return build_euler_interp(sde, path, k, x0)
    raise ConfigurationError(f"unknown method {method!r}; choose from {METHODS}")


def path_errors(sde, grid: FineGrid, seed: SeedSpec, methods, ks, delta=DEFAULT_DELTA, r=0):
    """Grid sup-distances to the reference for every (method, k) on one path."""
    path = sample_wiener(grid, seed)
    x0 = sde.sample_initial(seed)
    ref = reference_solution(sde, path, x0).values
    out = np.empty((len(methods), len(ks)))
    for i, method in enumerate(methods):
        for j, k in enumerate(ks):
            spline = _build(method, sde, path, k, delta, r, x0)
            out[i, j] = np.max(np.abs(ref - spline.grid_values(grid.steps)))
    return out


def sample_errors(sde, methods, ks, n_paths, grid, delta=DEFAULT_DELTA, r=0, seed=0, threads=1):
    """Array ``(n_paths, len(methods), len(ks))`` of pathwise errors."""
    sde = _resolve_sde(sde)
    master = seed.master_seed if isinstance(seed, SeedSpec) else int(seed)
    for m in methods:
        if m not in METHODS and m != "min":
            raise ConfigurationError(f"unknown method {m!r}; choose from {METHODS}")
    # the surrogate column is the dagger build; build it once
    unique = list(dict.fromkeys("dagger" if m == "min" else m for m in methods))
    rows = parallel_map(
        lambda i: path_errors(sde, grid, SeedSpec(master, i), unique, ks, delta, r),
        range(n_paths), threads,
    )
    pick = [unique.index("dagger" if m == "min" else m) for m in methods]
    return np.stack(rows)[:, pick, :]


def estimate_eq(method: str, sde, k: int, q: float, n_paths: int, grid: FineGrid,
                delta: float = DEFAULT_DELTA, r: int = 0, seed=0, threads: int = 1) -> ErrorEstimate:
    """Monte Carlo ``e_q`` of one method against the fine-grid reference."""
    if q < 1:
        raise ConfigurationError("q must be >= 1")
    errs = sample_errors(sde, [method], [k], n_paths, grid, delta, r, seed, threads)[:, 0, 0]
    est, se = power_mean(errs, q)
    return ErrorEstimate(method, k, q, n_paths, est, se)


def predicted_error(method: str, k: int, sigma_l2: float, sigma_sup: float, tau_mean: float | None) -> float:
    """Leading-order error of each method at budget ``k``."""
    if method == "euler":
        return sigma_sup / math.sqrt(2) * math.sqrt(math.log(k) / k)
    if tau_mean is None:
        raise ConfigurationError("free-knot predictions need E(tau_11)")
    norm = sigma_l2 if method in ("dagger", "min") else sigma_sup
    return norm / math.sqrt(tau_mean * k)


# -- run configuration ----------------------------------------------------------------


@dataclass
class RunConfig:
    command: str = "converge"
    sde: str = "ou"
    methods: list[str] = field(default_factory=lambda: ["dagger"])
    ks: list[int] = field(default_factory=lambda: [64, 128, 256, 512])
    qs: list[float] = field(default_factory=lambda: [1.0])
    degree: int = 0
    delta: float = DEFAULT_DELTA
    grid_exponent: int = 20
    n_paths: int = 500
    master_seed: int = 0
    out: str = ""
    tau_paths: int = 10_000
    tau_mean: float | None = None
    threads: int = 1

    def validate(self) -> "RunConfig":
        if self.command not in ("tau", "gamma", "converge", "compare"):
            raise ConfigurationError(f"unknown command {self.command!r}")
        preset(self.sde)
        for m in self.methods:
            if m not in METHODS and m != "min":
                raise ConfigurationError(f"unknown method {m!r}")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigurationError("k values must be positive")
        if self.command in ("converge", "gamma") and any(a >= b for a, b in zip(self.ks, self.ks[1:])):
            raise ConfigurationError("k list must be increasing")
        if any(not 1 <= q <= 4 for q in self.qs):
            raise ConfigurationError("q must lie in [1, 4]")
        if self.degree < 0:
            raise ConfigurationError("degree must be >= 0")
        if not 0.5 < self.delta < 1:
            raise ConfigurationError("delta must lie in (1/2, 1)")
        if not 2 <= self.grid_exponent <= 26:
            raise ConfigurationError("grid exponent must lie in [2, 26]")
        if self.n_paths < 1:
            raise ConfigurationError("need at least one path")
        if self.command == "tau" and self.n_paths < 100:
            raise ConfigurationError("tau needs at least 100 paths")
        if self.tau_paths < 100:
            raise ConfigurationError("tau-paths must be >= 100")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if self.threads < 0:
            raise ConfigurationError("threads must be >= 0")
        return self

    @property
    def grid(self) -> FineGrid:
        return FineGrid.from_exponent(self.grid_exponent)

    def to_json(self) -> str:
        d = asdict(self)
        d["version"] = __version__
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        d = json.loads(text)
        d.pop("version", None)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def _tau_mean(cfg: RunConfig) -> tuple[float, float]:
    if cfg.tau_mean is not None:
        return cfg.tau_mean, 0.0
    stats = estimate_tau_moments(cfg.degree, cfg.tau_paths, seed=SeedSpec(cfg.master_seed, TAU_STREAM_OFFSET))
    return stats.mean, stats.mean_std_error


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# -- studies ---------------------------------------------------------------------


def tau_table(cfg: RunConfig) -> str:
    grid = FineGrid.from_exponent(cfg.grid_exponent, TAU_HORIZON)
    stats = estimate_tau_moments(cfg.degree, cfg.n_paths, grid, SeedSpec(cfg.master_seed))
    return to_csv(TAU_HEADER, stats.rows())


def gamma_table(cfg: RunConfig) -> str:
    tau_mean, _ = _tau_mean(cfg)
    grid = cfg.grid

    def one(i):
        path = sample_wiener(grid, SeedSpec(cfg.master_seed, i))
        return [gamma_k(path, k, cfg.degree).gamma for k in cfg.ks]

    g = np.array(parallel_map(one, range(cfg.n_paths), cfg.threads))
    rows = []
    for j, k in enumerate(cfg.ks):
        med = float(np.median(g[:, j]))
        rows.append((k, cfg.degree, cfg.n_paths, med, med * math.sqrt(tau_mean * k)))
    return to_csv(GAMMA_HEADER, rows)


def convergence_rows(cfg: RunConfig):
    """Rows of the convergence table as dicts (one per method, k, q)."""
    sde = preset(cfg.sde)
    l2, sup = sigma_norms(sde)
    needs_tau = any(m != "euler" for m in cfg.methods)
    tau_mean = _tau_mean(cfg)[0] if needs_tau else None
    errs = sample_errors(sde, cfg.methods, cfg.ks, cfg.n_paths, cfg.grid, cfg.delta, cfg.degree,
                         cfg.master_seed, cfg.threads)
    rows = []
    for i, method in enumerate(cfg.methods):
        label = SURROGATE_TAG if method == "min" else method
        for j, k in enumerate(cfg.ks):
            for q in cfg.qs:
                est, se = power_mean(errs[:, i, j], q)
                scaled = math.sqrt(k) * est
                if method == "euler":
                    const = sup / math.sqrt(2) * math.sqrt(math.log(k))
                else:
                    const = (l2 if method in ("dagger", "min") else sup) / math.sqrt(tau_mean)
                rows.append(dict(method=label, k=k, q=q, n_paths=cfg.n_paths, e_q_hat=est, std_error=se,
                                 sqrt_k_times_eq=scaled, predicted_constant=const, ratio=scaled / const))
    return rows


def convergence_study(cfg: RunConfig) -> str:
    rows = convergence_rows(cfg)
    return to_csv(CONVERGE_HEADER, ([r[h] for h in CONVERGE_HEADER] for r in rows))


def compare_table(cfg: RunConfig) -> str:
    """Errors of several methods on shared paths, relative to the first method listed."""
    sde = preset(cfg.sde)
    l2, sup = sigma_norms(sde)
    kinds = {"euler" if m == "euler" else "knot" for m in cfg.methods}
    tau_mean = _tau_mean(cfg)[0] if len(kinds) > 1 else None
    errs = sample_errors(sde, cfg.methods, cfg.ks, cfg.n_paths, cfg.grid, cfg.delta, cfg.degree,
                         cfg.master_seed, cfg.threads)
    ref_method = cfg.methods[0]
    rows = []
    for j, k in enumerate(cfg.ks):
        for q in cfg.qs:
            base, _ = power_mean(errs[:, 0, j], q)
            pred_base = predicted_error(ref_method, k, l2, sup, tau_mean if tau_mean else 1.0)
            for i, method in enumerate(cfg.methods):
                est, se = power_mean(errs[:, i, j], q)
                pred = predicted_error(method, k, l2, sup, tau_mean if tau_mean else 1.0)
                label = SURROGATE_TAG if method == "min" else method
                rows.append((label, k, q, cfg.n_paths, est, se, est / base if base else math.nan, pred / pred_base))
    return to_csv(COMPARE_HEADER, rows)


COMMANDS = {"tau": tau_table, "gamma": gamma_table, "converge": convergence_study, "compare": compare_table}


def run(cfg: RunConfig) -> str:
    return COMMANDS[cfg.validate().command](cfg)
