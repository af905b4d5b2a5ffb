"""Nadaraya-Watson drift estimation from i.i.d. diffusion paths."""

__version__ = "0.1.0"

from driftkit.bandwidth import (
    H1,
    H2,
    BandwidthGrid,
    CvReport,
    cv_criterion,
    loo_drift,
    select_bandwidth,
)
from driftkit.estimators import (
    EstimateCurve,
    FloorSpec,
    estimate_bf,
    estimate_density,
    estimate_drift,
    estimate_drift_2b,
    quantile_grid,
    weights,
)
from driftkit.kernel import GAUSSIAN, Kernel, check_kernel_assumptions, eval_scaled, gaussian_kernel
from driftkit.sde import ObservationGrid, PathEnsemble, SdeModel, make_preset, simulate_ensemble
