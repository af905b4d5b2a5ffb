"""Smoothing kernels, their rescaled versions and numeric checks of the usual
kernel conditions (symmetry, unit mass, vanishing moments)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import simpson

from driftkit.errors import InvalidBandwidthError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gaussian(z):
    z = np.asarray(z, dtype=np.float64)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


@dataclass(frozen=True)
class Kernel:
    """A smoothing kernel ``K``.

    Parameters
    ----------
    evaluate : callable
        Vectorised pointwise evaluation ``z -> K(z)``.
    order : int
        Declared order: the largest ``p`` such that moments ``1..p`` vanish.
        It is declared by the author and checked by
        :func:`check_kernel_assumptions`, never inferred.
    tail_radius : float
        Radius ``R`` beyond which ``|K|`` is negligible for quadrature.
    name : str
        Label used in metadata.
    """

    evaluate: Callable[[ArrayLike], NDArray[np.float64]] = field(repr=False)
    order: int = 1
    tail_radius: float = 10.0
    name: str = "custom"

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"kernel order must be a positive integer, got {self.order!r}")
        if not self.tail_radius > 0:
            raise ValueError("tail_radius must be positive")

    def __call__(self, z):
        return self.evaluate(z)


def gaussian_kernel() -> Kernel:
    """The standard normal density, order 1, tail radius 10."""
    return Kernel(evaluate=_gaussian, order=1, tail_radius=10.0, name="gaussian")


GAUSSIAN = gaussian_kernel()


def _check_bandwidth(h: float) -> float:
    h = float(h)
    if not (h > 0.0 and math.isfinite(h)):
        raise InvalidBandwidthError(f"bandwidth must be positive and finite, got {h!r}")
    return h


def eval_scaled(K: Kernel, h: float, u):
    """``K_h(u) = K(u / h) / h``; scalar in, scalar out, arrays broadcast."""
    h = _check_bandwidth(h)
    out = K.evaluate(np.asarray(u, dtype=np.float64) / h) / h
    if np.ndim(out) == 0:
        return float(out)
    return out


def simpson_on_interval(func, a: float, b: float, points: int = 2**10 + 1) -> float:
    """Composite Simpson rule for ``func`` on ``[a, b]``.

    ``points`` is bumped to the next odd integer so every panel is complete.
    """
    points = int(points)
    if points % 2 == 0:
        points += 1
    z = np.linspace(a, b, points)
    return float(simpson(func(z), x=z))


@dataclass
class AssumptionReport:
    """Measured kernel quantities plus one pass flag per kernel condition."""

    order: int
    symmetry_defect: float
    mass: float
    mass_defect: float
    # moments[l - 1] is the l-th moment, l = 1..order + 1
    moments: list[float]
    abs_moment: float
    symmetric: bool
    unit_mass: bool
    vanishing_moments: bool
    finite_abs_moment: bool

    @property
    def passed(self) -> bool:
        return self.symmetric and self.unit_mass and self.vanishing_moments and self.finite_abs_moment

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "symmetry_defect": self.symmetry_defect,
            "mass": self.mass,
            "mass_defect": self.mass_defect,
            "moments": list(self.moments),
            "abs_moment": self.abs_moment,
            "symmetric": self.symmetric,
            "unit_mass": self.unit_mass,
            "vanishing_moments": self.vanishing_moments,
            "finite_abs_moment": self.finite_abs_moment,
            "passed": self.passed,
        }


def check_kernel_assumptions(
    K: Kernel,
    quadrature_points: int = 2**10,
    symmetry_tol: float = 1e-12,
    moment_tol: float = 1e-8,
) -> AssumptionReport:
    """Check symmetry, unit mass, vanishing moments ``1..order`` and finiteness
    of ``int |z^(order+1) K(z)| dz`` by Simpson quadrature on ``[-R, R]``.

    Failures are reported, never raised.
    """
    if quadrature_points < 128:
        raise ValueError("quadrature_points must be at least 128")
    R = K.tail_radius
    beta = K.order

    z = np.linspace(-R, R, quadrature_points + (1 - quadrature_points % 2))
    kz = np.asarray(K.evaluate(z), dtype=np.float64)
    symmetry_defect = float(np.max(np.abs(kz - K.evaluate(-z))))

    mass = float(simpson(kz, x=z))
    moments = [float(simpson(z**ell * kz, x=z)) for ell in range(1, beta + 2)]
    abs_moment = float(simpson(np.abs(z ** (beta + 1) * kz), x=z))

    return AssumptionReport(
        order=beta,
        symmetry_defect=symmetry_defect,
        mass=mass,
        mass_defect=abs(mass - 1.0),
        moments=moments,
        abs_moment=abs_moment,
        symmetric=symmetry_defect <= symmetry_tol,
        unit_mass=abs(mass - 1.0) <= moment_tol,
        vanishing_moments=all(abs(m) <= moment_tol for m in moments[:beta]),
        finite_abs_moment=bool(np.isfinite(abs_moment)),
    )
