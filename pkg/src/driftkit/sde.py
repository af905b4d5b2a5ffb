"""Euler-Maruyama simulation of i.i.d. paths of a scalar diffusion

    dX_t = b(X_t) dt + sigma(X_t) dW_t,   X_0 = x0,

recorded on a uniform observation grid of ``[t0, T]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from driftkit.errors import InvalidModelError, SimulationDivergedError

_PROBE = np.linspace(-10.0, 10.0, 201)
# paths integrated together; bounds the normal-draw buffer to ~block * steps doubles
_BLOCK = 2048


@dataclass(frozen=True)
class SdeModel:
    """Drift/diffusion pair with initial condition.

    ``drift`` and ``diffusion`` must accept numpy arrays and act elementwise.
    """

    drift: Callable[[NDArray], NDArray] = field(repr=False)
    diffusion: Callable[[NDArray], NDArray] = field(repr=False)
    x0: float = 2.0
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.x0):
            raise InvalidModelError("x0 must be finite")
        with np.errstate(all="ignore"):
            b = np.broadcast_to(np.asarray(self.drift(_PROBE), dtype=float), _PROBE.shape)
            s = np.broadcast_to(np.asarray(self.diffusion(_PROBE), dtype=float), _PROBE.shape)
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(s))):
            raise InvalidModelError(f"model {self.name!r}: drift/diffusion not finite on [-10, 10]")


def _linear_drift(x):
    return -np.asarray(x, dtype=float)


def _sine_drift(x):
    x = np.asarray(x, dtype=float)
    return -(x + np.sin(4.0 * x))


def _additive(x):
    return np.full(np.shape(x), 0.1)


def _hyperbolic(x):
    x = np.asarray(x, dtype=float)
    return 0.1 * np.sqrt(1.0 + x * x)


def _cosine(x):
    return 0.1 * (2.0 + np.cos(np.asarray(x, dtype=float)))


_PRESETS = {
    1: ("langevin", _linear_drift, _additive, "b(x)=-x, sigma(x)=0.1"),
    2: ("hyperbolic", _linear_drift, _hyperbolic, "b(x)=-x, sigma(x)=0.1*sqrt(1+x^2)"),
    3: ("sine-additive", _sine_drift, _additive, "b(x)=-(x+sin(4x)), sigma(x)=0.1"),
    4: ("sine-multiplicative", _sine_drift, _cosine, "b(x)=-(x+sin(4x)), sigma(x)=0.1*(2+cos(x))"),
}


def make_preset(model_id: int, x0: float = 2.0) -> SdeModel:
    """One of the four benchmark models (1: Langevin, 2: hyperbolic,
    3 and 4: sine drift with additive / multiplicative noise)."""
    try:
        key = int(model_id)
    except (TypeError, ValueError):
        raise InvalidModelError(f"unknown model id {model_id!r}") from None
    if key != model_id or key not in _PRESETS:
        raise InvalidModelError(f"unknown model id {model_id!r}; expected one of 1, 2, 3, 4")
    name, b, s, formula = _PRESETS[key]
    return SdeModel(drift=b, diffusion=s, x0=x0, name=name, params={"model_id": key, "formula": formula})


@dataclass(frozen=True)
class ObservationGrid:
    """Uniform dissection ``t_j = t0 + j (T - t0) / n`` of ``[t0, T]``."""

    t0: float
    T: float
    n: int

    def __post_init__(self):
        if not (self.t0 >= 0 and math.isfinite(self.t0)):
            raise ValueError(f"t0 must be nonnegative, got {self.t0!r}")
        if not (self.T > self.t0 and math.isfinite(self.T)):
            raise ValueError(f"need T > t0, got T={self.T!r}, t0={self.t0!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n

    @property
    def times(self) -> NDArray[np.float64]:
        # linspace pins both endpoints exactly
        return np.linspace(self.t0, self.T, self.n + 1)

    @classmethod
    def from_times(cls, times) -> "ObservationGrid":
        times = np.asarray(times, dtype=np.float64)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("need at least two observation times")
        grid = cls(float(times[0]), float(times[-1]), times.size - 1)
        if not np.allclose(grid.times, times, rtol=0.0, atol=1e-9 * max(1.0, abs(grid.T))):
            raise ValueError("observation times are not a uniform dissection")
        return grid


@dataclass(frozen=True)
class PathEnsemble:
    """``N`` discretised paths; ``values[i, j]`` is path ``i`` at ``grid.times[j]``."""

    grid: ObservationGrid
    values: NDArray[np.float64] = field(repr=False)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array (paths x times)")
        if values.shape[0] < 1:
            raise ValueError("ensemble needs at least one path")
        if values.shape[1] != self.grid.n + 1:
            raise ValueError(f"expected {self.grid.n + 1} columns, got {values.shape[1]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("ensemble contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def states(self) -> NDArray[np.float64]:
        """Observations entering kernel sums: ``X_{t_j}``, ``j = 0..n-1``."""
        return self.values[:, :-1]

    @property
    def increments(self) -> NDArray[np.float64]:
        """``X_{t_{j+1}} - X_{t_j}``, ``j = 0..n-1``."""
        return np.diff(self.values, axis=1)

    def concat(self, other: "PathEnsemble") -> "PathEnsemble":
        if other.grid != self.grid:
            raise ValueError("cannot concatenate ensembles on different grids")
        return PathEnsemble(self.grid, np.vstack([self.values, other.values]))


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based (Philox) stream keyed by ``(seed, path_index)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.Philox(ss))


def _burn_in_steps(t0: float, dt: float) -> tuple[int, float]:
    if t0 == 0.0:
        return 0, 0.0
    k = round(t0 / dt)
    if k >= 1 and abs(k * dt - t0) <= 1e-9 * t0:
        return k, dt
    # t0 is not a multiple of dt: shrink the step so the burn-in lands on t0
    k = math.ceil(t0 / dt)
    return k, t0 / k


def simulate_ensemble(
    model: SdeModel,
    N: int,
    grid: ObservationGrid,
    substeps: int = 10,
    seed: int = 0,
) -> PathEnsemble:
    """Simulate ``N`` independent Euler-Maruyama paths from ``(0, x0)``.

    The internal step is ``(T - t0) / (n * substeps)`` on both the discarded
    burn-in ``[0, t0]`` and the observed segment; only values at
    ``grid.times`` are kept. Path ``i`` draws its Gaussian increments from
    :func:`path_generator` ``(seed, i)``, so the output does not depend on
    how paths are blocked together.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if int(substeps) != substeps or substeps < 1:
        raise ValueError(f"substeps must be a positive integer, got {substeps!r}")
    N, substeps = int(N), int(substeps)

    dt = grid.dt / substeps
    n_burn, dt_burn = _burn_in_steps(grid.t0, dt)
    n_obs = grid.n * substeps
    values = np.empty((N, grid.n + 1), dtype=np.float64)

    for start in range(0, N, _BLOCK):
        stop = min(start + _BLOCK, N)
        z = np.empty((stop - start, n_burn + n_obs), dtype=np.float64)
        for i in range(start, stop):
            z[i - start] = path_generator(seed, i).standard_normal(n_burn + n_obs)
        values[start:stop] = _integrate(model, z, n_burn, dt_burn, dt, substeps, grid, start)

    meta = {"model": model.name, "model_params": dict(model.params), "x0": model.x0,
            "seed": int(seed), "substeps": substeps, "N": N}
    return PathEnsemble(grid, values, meta)


def _integrate(model, z, n_burn, dt_burn, dt, substeps, grid, offset):
    x = np.full(z.shape[0], float(model.x0))
    out = np.empty((z.shape[0], grid.n + 1))
    sq_burn, sq = math.sqrt(dt_burn), math.sqrt(dt)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_burn):
            x = x + model.drift(x) * dt_burn + model.diffusion(x) * sq_burn * z[:, k]
            _check(x, offset, (k + 1) * dt_burn)
        out[:, 0] = x
        col = n_burn
        for j in range(grid.n):
            for s in range(substeps):
                x = x + model.drift(x) * dt + model.diffusion(x) * sq * z[:, col]
                col += 1
            _check(x, offset, grid.t0 + (j + 1) * grid.dt)
            out[:, j + 1] = x
    return out


def _check(x, offset, t):
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise SimulationDivergedError(offset + bad, t)
