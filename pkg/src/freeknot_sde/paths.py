"""Seedable Brownian paths on a uniform fine grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Stream purposes; they become the last spawn-key component so the Brownian
# increments and the initial-value draw of one replication never overlap.
PURPOSE_WIENER = 0
PURPOSE_INITIAL = 1


@dataclass(frozen=True)
class FineGrid:
    """Equispaced times ``t_i = i * horizon / steps`` for ``i = 0..steps``."""

    steps: int
    horizon: float = 1.0

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(f"fine grid needs at least 1 step, got {self.steps}")
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")

    @classmethod
    def from_exponent(cls, exponent: int, horizon: float = 1.0) -> "FineGrid":
        return cls(2 ** int(exponent), horizon)

    @property
    def points(self) -> int:
        return self.steps + 1

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def times(self) -> np.ndarray:
        return np.arange(self.points) * self.dt

    def time(self, index: int) -> float:
        return index * self.dt

    def nearest_index(self, t: float) -> int:
        return int(np.rint(t / self.dt))

    def __len__(self):
        return self.points


@dataclass(frozen=True)
class SeedSpec:
    """A replication stream: ``(master_seed, stream_index)``.

    Streams are derived through :class:`numpy.random.SeedSequence` spawn keys,
    so any stream can be generated without touching the others.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ConfigurationError("stream_index must be nonnegative")

    def generator(self, purpose: int = PURPOSE_WIENER) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, purpose))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_index + offset)


@dataclass(frozen=True, eq=False)
class SamplePath:
    grid: FineGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.flags.writeable:
            # never freeze an array the caller may still write to
            values = values.copy()
        if values.ndim != 1 or values.size != self.grid.points:
            raise ConfigurationError(
                f"path has {values.size} values but the grid has {self.grid.points} points"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    @property
    def initial_value(self) -> float:
        return float(self.values[0])

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, SamplePath):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)


def wiener_increments(grid: FineGrid, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    count = grid.steps if count is None else count
    return rng.standard_normal(count) * np.sqrt(grid.dt)


def sample_wiener(grid: FineGrid, seed: SeedSpec) -> SamplePath:
    """Brownian motion started at 0, sampled on ``grid``.

    Increments are drawn sequentially from the seeded stream, so a longer
    grid with the same step size extends a shorter one bit-for-bit.
    """
    if grid.steps < 2:
        raise ConfigurationError(f"Wiener sampling needs M >= 2, got {grid.steps}")
    values = np.empty(grid.points)
    values[0] = 0.0
    np.cumsum(wiener_increments(grid, seed.generator()), out=values[1:])
    values.setflags(write=False)
    return SamplePath(grid, values)


def path_from_values(values, horizon: float = 1.0) -> SamplePath:
    values = np.asarray(values, dtype=np.float64)
    return SamplePath(FineGrid(values.size - 1, horizon), values)


def shifted_subpath(path: SamplePath, from_index: int, to_index: int) -> SamplePath:
    """``W(t) - W(t_from)`` on the grid points ``from_index..to_index``.

    The returned path lives on its own grid starting at time 0 with the
    parent's step size.
    """
    if not 0 <= from_index < to_index <= path.grid.steps:
        raise ValueError(
            f"need 0 <= from_index < to_index <= {path.grid.steps}, got {from_index}, {to_index}"
        )
    seg = path.values[from_index : to_index + 1]
    steps = to_index - from_index
    grid = FineGrid(steps, steps * path.grid.dt)
    return SamplePath(grid, seg - seg[0])

