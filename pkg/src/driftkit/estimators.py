"""Discrete-time Nadaraya-Watson estimators built from an ensemble of paths.

With ``M = N n`` kernel centres ``X^i_{t_j}`` (``j < n``) and increments
``dX^i_j = X^i_{t_{j+1}} - X^i_{t_j}``:

* density   ``f(x)  = sum K_h(X - x) / (n N)``
* numerator ``bf(x) = sum K_h(X - x) dX / (N (T - t0))``
* drift     ``b(x)  = bf(x) / max(f(x), floor)``

The last observation ``X_{t_n}`` only enters through the last increment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from driftkit.errors import DegenerateDensityError, DegenerateWeightsError
from driftkit.kernel import Kernel, _check_bandwidth
from driftkit.sde import PathEnsemble

# cap on the (abscissae x centres) kernel block held in memory at once
_MAX_BLOCK = 2**22

KINDS = ("density", "bf", "drift")


@dataclass(frozen=True)
class EstimateCurve:
    """Estimator values on an abscissa grid. ``meta`` carries bandwidths,
    floor and grid rule for serialisation."""

    xs: NDArray[np.float64] = field(repr=False)
    values: NDArray[np.float64] = field(repr=False)
    kind: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        xs = np.array(self.xs, dtype=np.float64).reshape(-1)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if xs.shape != values.shape:
            raise ValueError(f"xs and values differ in length ({xs.size} vs {values.size})")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(values))):
            raise ValueError("curve contains non-finite entries")
        xs.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.xs.size


@dataclass(frozen=True)
class FloorSpec:
    """Lower bound applied to the density in the drift ratio.

    ``absolute`` with level ``m`` floors at ``m / 2``; ``data_driven`` with
    ``fraction`` floors at ``fraction * max f`` over the evaluation grid.
    """

    mode: str
    value: float

    def __post_init__(self):
        if self.mode == "absolute":
            if not (self.value > 0 and math.isfinite(self.value)):
                raise ValueError("absolute floor level m must be positive")
        elif self.mode == "data_driven":
            if not 0.0 < self.value <= 1.0:
                raise ValueError("data-driven floor fraction must lie in (0, 1]")
        else:
            raise ValueError(f"unknown floor mode {self.mode!r}")

    @classmethod
    def absolute(cls, m: float) -> "FloorSpec":
        return cls("absolute", float(m))

    @classmethod
    def data_driven(cls, fraction: float = 0.01) -> "FloorSpec":
        return cls("data_driven", float(fraction))

    @classmethod
    def parse(cls, text: str) -> "FloorSpec":
        """``"abs:<m>"`` or ``"data:<fraction>"``."""
        mode, _, val = text.partition(":")
        mode = {"abs": "absolute", "absolute": "absolute", "data": "data_driven",
                "data_driven": "data_driven"}.get(mode.strip())
        if mode is None or not val:
            raise ValueError(f"cannot parse floor {text!r}; use abs:<m> or data:<fraction>")
        return cls(mode, float(val))

    def level(self, density_values) -> float:
        if self.mode == "absolute":
            return self.value / 2.0
        return self.value * float(np.max(density_values))

    def as_dict(self) -> dict:
        return {"mode": self.mode, "value": self.value}


DEFAULT_FLOOR = FloorSpec.data_driven(0.01)


def quantile_grid(ens: PathEnsemble, q: float = 0.05, points: int = 200) -> NDArray[np.float64]:
    """``points`` equispaced abscissae spanning the ``[q, 1 - q]`` empirical
    quantiles of the kernel centres."""
    if not 0.0 <= q < 0.5:
        raise ValueError("quantile q must lie in [0, 0.5)")
    if points < 2:
        raise ValueError("need at least two evaluation points")
    lo, hi = np.quantile(ens.states, [q, 1.0 - q])
    if hi <= lo:
        hi = lo + 1e-12 * max(1.0, abs(lo))
    return np.linspace(lo, hi, int(points))


def _kernel_block(K, h, centres, xs):
    return K.evaluate((centres[None, :] - xs[:, None]) / h) / h


def kernel_sums(
    centres: NDArray, marks: NDArray | None, K: Kernel, h: float, xs: NDArray
) -> tuple[NDArray, NDArray | None]:
    """``S0[g] = sum_m K_h(c_m - x_g)`` and ``S1[g] = sum_m K_h(c_m - x_g) w_m``.

    Row-blocked over abscissae only, so each entry is reduced in the same
    order however the rows are split.
    """
    h = _check_bandwidth(h)
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    s0 = np.empty(xs.size)
    s1 = np.empty(xs.size) if marks is not None else None
    rows = max(1, _MAX_BLOCK // max(1, centres.size))
    for a in range(0, xs.size, rows):
        blk = _kernel_block(K, h, centres, xs[a:a + rows])
        s0[a:a + rows] = blk.sum(axis=1)
        if marks is not None:
            s1[a:a + rows] = (blk * marks[None, :]).sum(axis=1)
    return s0, s1


def _flat(ens: PathEnsemble):
    return ens.states.reshape(-1), ens.increments.reshape(-1)


def _abscissae(xs: ArrayLike) -> NDArray[np.float64]:
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    if xs.size == 0:
        raise ValueError("no evaluation abscissae")
    return xs


def estimate_density(ens: PathEnsemble, K: Kernel, h: float, xs: ArrayLike) -> EstimateCurve:
    xs = _abscissae(xs)
    centres, _ = _flat(ens)
    s0, _ = kernel_sums(centres, None, K, h, xs)
    return EstimateCurve(xs, s0 / (ens.n * ens.N), "density", {"h": float(h), "kernel": K.name})


def estimate_bf(ens: PathEnsemble, K: Kernel, h: float, xs: ArrayLike) -> EstimateCurve:
    xs = _abscissae(xs)
    centres, dx = _flat(ens)
    _, s1 = kernel_sums(centres, dx, K, h, xs)
    span = ens.grid.T - ens.grid.t0
    return EstimateCurve(xs, s1 / (ens.N * span), "bf", {"h": float(h), "kernel": K.name})


def _ratio(bf, f, floor: FloorSpec):
    level = floor.level(f)
    if not level > 0.0:
        raise DegenerateDensityError("density estimate vanishes on the whole grid; floor is 0")
    return bf / np.maximum(f, level), level


def estimate_drift_2b(
    ens: PathEnsemble,
    K: Kernel,
    h: float,
    eta: float,
    xs: ArrayLike,
    floor: FloorSpec = DEFAULT_FLOOR,
) -> EstimateCurve:
    """Drift estimate with bandwidth ``h`` in the numerator and ``eta`` in
    the density denominator."""
    xs = _abscissae(xs)
    h, eta = _check_bandwidth(h), _check_bandwidth(eta)
    centres, dx = _flat(ens)
    if h == eta:
        s0, s1 = kernel_sums(centres, dx, K, h, xs)
    else:
        _, s1 = kernel_sums(centres, dx, K, h, xs)
        s0, _ = kernel_sums(centres, None, K, eta, xs)
    f = s0 / (ens.n * ens.N)
    bf = s1 / (ens.N * (ens.grid.T - ens.grid.t0))
    values, level = _ratio(bf, f, floor)
    meta = {
        "h": h,
        "eta": eta,
        "kernel": K.name,
        "floor": floor.as_dict(),
        "floor_level": level,
        "floor_binding": int(np.count_nonzero(f < level)),
    }
    return EstimateCurve(xs, values, "drift", meta)


def estimate_drift(
    ens: PathEnsemble,
    K: Kernel,
    h: float,
    xs: ArrayLike,
    floor: FloorSpec = DEFAULT_FLOOR,
) -> EstimateCurve:
    return estimate_drift_2b(ens, K, h, h, xs, floor)


def weights(ens: PathEnsemble, K: Kernel, h: float, x: float) -> NDArray[np.float64]:
    """``N x n`` matrix of Nadaraya-Watson weights at ``x``.

    ``dt * weights.sum() == 1`` and ``(weights * increments).sum()`` is the
    unfloored drift estimate at ``x``.
    """
    h = _check_bandwidth(h)
    k = K.evaluate((ens.states - float(x)) / h) / h
    total = ens.grid.dt * k.sum()
    if not total > 0.0:
        raise DegenerateWeightsError(f"kernel weights vanish at x={x!r} (h={h})")
    return k / total
