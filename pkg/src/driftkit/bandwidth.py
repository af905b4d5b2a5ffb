"""Leave-one-path-out cross-validation for the drift bandwidth.

For path ``i`` held out, the drift is re-estimated from the other paths'
increments,

    b^{-i}(x) = sum_{i' != i, j} w^{i'}_j(x) dX^{i'}_j,

where by default the weights keep the kernel mass of all ``N`` paths in their
denominator (``renormalized=True`` drops path ``i`` there too). The criterion

    CV(h) = sum_i [ dt sum_j b^{-i}(X^i_j)^2 - 2 sum_j b^{-i}(X^i_j) dX^i_j ]

is evaluated at the held-out path's states ``j = 0..n-1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from driftkit.errors import (
    DegenerateWeightsError,
    DriftkitError,
    InsufficientPathsError,
    SelectionFailedError,
)
from driftkit.kernel import Kernel, _check_bandwidth
from driftkit.sde import PathEnsemble

log = logging.getLogger(__name__)

# keep the pairwise-difference cache below ~64 MB
_MAX_CACHE = 2**23


def _decimal_grid(step: float, count: int, start: float | None = None) -> tuple[float, ...]:
    start = step if start is None else start
    return tuple(round(start + k * step, 12) for k in range(count))


H1 = _decimal_grid(0.02, 10)
H2 = _decimal_grid(0.01, 10)


@dataclass(frozen=True)
class BandwidthGrid:
    """Strictly increasing candidate bandwidths. Unsorted input is sorted."""

    hs: tuple[float, ...]

    def __post_init__(self):
        hs = tuple(sorted(float(h) for h in self.hs))
        if not hs:
            raise ValueError("bandwidth grid is empty")
        if hs[0] <= 0 or not np.all(np.isfinite(hs)):
            raise ValueError("bandwidths must be positive and finite")
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError("bandwidth grid has duplicate entries")
        object.__setattr__(self, "hs", hs)

    def __len__(self):
        return len(self.hs)

    def __iter__(self):
        return iter(self.hs)

    @classmethod
    def parse(cls, text: str) -> "BandwidthGrid":
        """``"start:step:count"`` or a comma-separated list."""
        text = text.strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError(f"range grid must be start:step:count, got {text!r}")
            start, step, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1 or step <= 0:
                raise ValueError("grid needs count >= 1 and a positive step")
            return cls(_decimal_grid(step, count, start))
        return cls(tuple(float(t) for t in text.split(",") if t.strip()))


@dataclass
class CvReport:
    hs: tuple[float, ...]
    criteria: NDArray[np.float64]
    selected: float
    selected_index: int
    degenerate: list[int] = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    renormalized: bool = False

    def as_dict(self) -> dict:
        return {
            "hs": list(self.hs),
            "criteria": [float(c) for c in self.criteria],
            "selected": self.selected,
            "selected_index": self.selected_index,
            "degenerate_points": list(self.degenerate),
            "failures": {repr(h): msg for h, msg in self.failures.items()},
            "renormalized": self.renormalized,
        }


@dataclass
class CvTerms:
    """Pieces of the criterion: ``value = quadratic - 2 * cross``."""

    value: float
    quadratic: float
    cross: float
    degenerate: int


class _Workspace:
    """Flattened centres/increments and, when small enough, the matrix of
    pairwise differences reused across bandwidths."""

    def __init__(self, ens: PathEnsemble):
        if ens.N < 2:
            raise InsufficientPathsError(f"leave-one-out needs N >= 2 paths, got {ens.N}")
        self.ens = ens
        self.N, self.n = ens.N, ens.n
        self.dt = ens.grid.dt
        self.centres = ens.states.reshape(-1)
        self.dx = ens.increments.reshape(-1)
        self._diff = None

    @property
    def diff(self):
        if self._diff is None and self.centres.size**2 <= _MAX_CACHE:
            self._diff = self.centres[None, :] - self.centres[:, None]
        return self._diff

    def per_path_sums(self, K: Kernel, h: float, xs: NDArray | None = None):
        """``(G, N)`` arrays of per-path kernel mass and kernel-weighted
        increments at each abscissa (the ensemble's own states if ``xs`` is
        None)."""
        if xs is None and self.diff is not None:
            a = K.evaluate(self.diff / h) / h
        else:
            pts = self.centres if xs is None else xs
            a = K.evaluate((self.centres[None, :] - pts[:, None]) / h) / h
        G = a.shape[0]
        mass = a.reshape(G, self.N, self.n).sum(axis=2)
        flux = (a * self.dx[None, :]).reshape(G, self.N, self.n).sum(axis=2)
        return mass, flux


def _loo_ratio(mass, flux, held_out, dt, renormalized):
    """Leave-one-out drift per row; rows whose denominator vanishes are NaN."""
    rows = np.arange(mass.shape[0])
    flux = flux.copy()
    flux[rows, held_out] = 0.0
    if renormalized:
        mass = mass.copy()
        mass[rows, held_out] = 0.0
    denom = dt * mass.sum(axis=1)
    num = flux.sum(axis=1)
    out = np.full(num.shape, np.nan)
    ok = denom > 0.0
    out[ok] = num[ok] / denom[ok]
    return out


def loo_drift(
    ens: PathEnsemble,
    K: Kernel,
    h: float,
    i: int,
    xpoints: ArrayLike,
    renormalized: bool = False,
) -> NDArray[np.float64]:
    """Drift estimate at ``xpoints`` with path ``i`` removed from the numerator
    (and from the denominator too when ``renormalized``)."""
    h = _check_bandwidth(h)
    ws = _Workspace(ens)
    if not 0 <= i < ens.N:
        raise IndexError(f"path index {i} out of range for N={ens.N}")
    xs = np.atleast_1d(np.asarray(xpoints, dtype=np.float64))
    mass, flux = ws.per_path_sums(K, h, xs)
    out = _loo_ratio(mass, flux, np.full(xs.size, i), ws.dt, renormalized)
    if np.any(np.isnan(out)):
        bad = xs[np.isnan(out)][0]
        raise DegenerateWeightsError(f"leave-one-out weights vanish at x={bad!r} (h={h})")
    return out


def _cv_terms(ws: _Workspace, K: Kernel, h: float, renormalized: bool) -> CvTerms:
    mass, flux = ws.per_path_sums(K, h)
    held_out = np.repeat(np.arange(ws.N), ws.n)
    b = _loo_ratio(mass, flux, held_out, ws.dt, renormalized)
    bad = np.isnan(b)
    degenerate = int(np.count_nonzero(bad))
    if degenerate:
        # a vanished denominator contributes 0 to the criterion
        b[bad] = 0.0
    quadratic = ws.dt * float(np.sum(b * b))
    cross = float(np.sum(b * ws.dx))
    return CvTerms(quadratic - 2.0 * cross, quadratic, cross, degenerate)


def cv_terms(ens: PathEnsemble, K: Kernel, h: float, renormalized: bool = False) -> CvTerms:
    return _cv_terms(_Workspace(ens), K, _check_bandwidth(h), renormalized)


def cv_criterion(ens: PathEnsemble, K: Kernel, h: float, renormalized: bool = False) -> float:
    """Leave-one-path-out criterion at bandwidth ``h``."""
    return cv_terms(ens, K, h, renormalized).value


def select_bandwidth(
    ens: PathEnsemble,
    K: Kernel,
    grid: BandwidthGrid | tuple | list,
    renormalized: bool = False,
) -> CvReport:
    """Minimise the criterion over ``grid``; exact ties go to the larger
    bandwidth. Bandwidths whose evaluation raises are skipped and reported."""
    if not isinstance(grid, BandwidthGrid):
        grid = BandwidthGrid(tuple(grid))
    ws = _Workspace(ens)
    criteria = np.full(len(grid), np.nan)
    degenerate = [0] * len(grid)
    failures = {}
    for k, h in enumerate(grid.hs):
        try:
            terms = _cv_terms(ws, K, h, renormalized)
        except DriftkitError as exc:
            log.warning("criterion failed at h=%g: %s", h, exc)
            failures[h] = str(exc)
            continue
        criteria[k] = terms.value
        degenerate[k] = terms.degenerate
    ok = np.flatnonzero(np.isfinite(criteria))
    if ok.size == 0:
        raise SelectionFailedError(f"criterion failed at every bandwidth: {failures}")
    best = np.min(criteria[ok])
    # grid is increasing, so the last minimiser is the largest bandwidth
    idx = int(ok[criteria[ok] == best][-1])
    return CvReport(grid.hs, criteria, grid.hs[idx], idx, degenerate, failures, renormalized)
