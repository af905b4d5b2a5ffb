"""Monte-Carlo harness: replicated simulate / cross-validate / estimate / score
runs, the four-model MSE table and an empirical density-risk rate study.

Every replication is keyed by ``(base_seed, rep_index)`` so results do not
depend on scheduling; ``DRIFTKIT_THREADS`` caps the worker pool.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson

from driftkit.bandwidth import H1, H2, BandwidthGrid, CvReport, select_bandwidth
from driftkit.errors import DriftkitError, ExperimentFailedError, ReplicationError
from driftkit.estimators import (
    DEFAULT_FLOOR,
    EstimateCurve,
    FloorSpec,
    estimate_density,
    estimate_drift,
    kernel_sums,
    quantile_grid,
)
from driftkit.kernel import GAUSSIAN, Kernel
from driftkit.sde import ObservationGrid, SdeModel, make_preset, simulate_ensemble

log = logging.getLogger(__name__)

MSE_CONVENTION = "unweighted mean over the quantile-trimmed evaluation grid"
MAX_FAILURE_RATE = 0.2


def worker_count() -> int:
    raw = os.environ.get("DRIFTKIT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer DRIFTKIT_THREADS=%r", raw)
    return max(1, min(8, os.cpu_count() or 1))


def _pmap(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def derive_seed(*keys: int) -> int:
    """64-bit seed from an integer key tuple (order-sensitive)."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_grid(model_id: int | None) -> BandwidthGrid:
    return BandwidthGrid(H2 if model_id in (3, 4) else H1)


@dataclass(frozen=True)
class ExperimentConfig:
    """Defaults reproduce the benchmark protocol: N = n = 50, T = 5, x0 = 2,
    t0 = 1, Gaussian kernel, 10 replications.

    ``model`` overrides ``model_id`` with a custom drift/diffusion pair (its
    own ``x0`` is used). ``rep_seeds`` forces per-replication seeds.
    """

    model_id: int | None = 1
    N: int = 50
    n: int = 50
    T: float = 5.0
    t0: float = 1.0
    x0: float = 2.0
    bandwidth_grid: BandwidthGrid | None = None
    replications: int = 10
    eval_quantile: float = 0.05
    eval_points: int = 200
    substeps: int = 10
    base_seed: int = 0
    floor: FloorSpec = DEFAULT_FLOOR
    renormalized: bool = False
    kernel: Kernel = GAUSSIAN
    model: SdeModel | None = None
    rep_seeds: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.model is None and self.model_id is None:
            raise ValueError("need a model_id or a custom model")
        if not 0 <= self.t0 < self.T:
            raise ValueError("need 0 <= t0 < T")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0.0 < self.eval_quantile < 0.5:
            raise ValueError("eval_quantile must lie in (0, 0.5)")
        if self.rep_seeds is not None and len(self.rep_seeds) < self.replications:
            raise ValueError("rep_seeds shorter than replications")
        if self.bandwidth_grid is None:
            object.__setattr__(self, "bandwidth_grid", default_grid(self.model_id))

    @property
    def sde_model(self) -> SdeModel:
        if self.model is not None:
            return self.model
        return make_preset(self.model_id, x0=self.x0)

    @property
    def grid(self) -> ObservationGrid:
        return ObservationGrid(self.t0, self.T, self.n)

    def seed_for(self, rep_index: int) -> int:
        if self.rep_seeds is not None:
            return int(self.rep_seeds[rep_index])
        return derive_seed(self.base_seed, rep_index)

    def as_dict(self) -> dict:
        model = self.sde_model
        return {
            "model_id": self.model_id if self.model is None else None,
            "model": model.name,
            "N": self.N,
            "n": self.n,
            "T": self.T,
            "t0": self.t0,
            "x0": model.x0,
            "bandwidth_grid": list(self.bandwidth_grid.hs),
            "replications": self.replications,
            "eval_quantile": self.eval_quantile,
            "eval_points": self.eval_points,
            "substeps": self.substeps,
            "base_seed": self.base_seed,
            "floor": self.floor.as_dict(),
            "renormalized": self.renormalized,
            "kernel": self.kernel.name,
            "rep_seeds": list(self.rep_seeds) if self.rep_seeds is not None else None,
        }


@dataclass
class ReplicationResult:
    rep_index: int
    seed: int
    selected_h: float
    mse: float
    curve: EstimateCurve = field(repr=False)
    cv: CvReport = field(repr=False)
    # MSE of the estimate at every candidate bandwidth
    proposal_mse: NDArray[np.float64] = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {
            "rep_index": self.rep_index,
            "seed": self.seed,
            "selected_h": self.selected_h,
            "mse": self.mse,
            "proposal_mse": [float(v) for v in self.proposal_mse],
            "cv": self.cv.as_dict(),
        }


def mse(curve: EstimateCurve, true_drift: Callable) -> float:
    """Mean squared deviation from ``true_drift`` over the curve's abscissae."""
    if curve.kind != "drift":
        raise ValueError(f"mse scores drift curves, got kind={curve.kind!r}")
    if len(curve) == 0:
        raise ValueError("empty curve")
    resid = curve.values - np.asarray(true_drift(curve.xs), dtype=np.float64)
    return float(np.mean(resid * resid))


def run_replication(cfg: ExperimentConfig, rep_index: int) -> ReplicationResult:
    """Simulate, select the bandwidth by cross-validation, estimate the drift
    on the trimmed grid and score it. Errors come back as
    :class:`ReplicationError` carrying ``rep_index``."""
    seed = cfg.seed_for(rep_index)
    model = cfg.sde_model
    try:
        ens = simulate_ensemble(model, cfg.N, cfg.grid, cfg.substeps, seed)
        report = select_bandwidth(ens, cfg.kernel, cfg.bandwidth_grid, cfg.renormalized)
        xs = quantile_grid(ens, cfg.eval_quantile, cfg.eval_points)
        proposals = []
        curve = None
        for k, h in enumerate(report.hs):
            c = estimate_drift(ens, cfg.kernel, h, xs, cfg.floor)
            proposals.append(mse(c, model.drift))
            if k == report.selected_index:
                curve = c
    except DriftkitError as exc:
        raise ReplicationError(rep_index, exc) from exc
    curve.meta.update({"grid_rule": f"quantile q={cfg.eval_quantile}, G={cfg.eval_points}",
                       "rep_index": rep_index, "seed": seed})
    return ReplicationResult(rep_index, seed, report.selected, proposals[report.selected_index],
                             curve, report, np.asarray(proposals))


@dataclass
class Table1Summary:
    config: ExperimentConfig = field(repr=False)
    mean_mse: float
    std_mse: float
    per_rep: list[ReplicationResult] = field(repr=False)
    failures: dict[int, str] = field(default_factory=dict)
    # mean over replications of the MSE averaged over all candidate bandwidths
    proposal_mean_mse: float = float("nan")
    std_defined: bool = True

    @property
    def failure_count(self) -> int:
        return len(self.failures)

    def as_dict(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "mse_convention": MSE_CONVENTION,
            "mean_mse": self.mean_mse,
            "std_mse": self.std_mse,
            "mean_mse_x100": 100.0 * self.mean_mse,
            "std_mse_x100": 100.0 * self.std_mse,
            "proposal_mean_mse": self.proposal_mean_mse,
            "std_defined": self.std_defined,
            "failure_count": self.failure_count,
            "failures": {str(k): v for k, v in sorted(self.failures.items())},
            "per_rep": [r.as_dict() for r in self.per_rep],
        }


def _try_rep(cfg, k):
    try:
        return run_replication(cfg, k)
    except ReplicationError as exc:
        log.warning("%s", exc)
        return exc


def table1_experiment(cfg: ExperimentConfig) -> Table1Summary:
    """Run ``cfg.replications`` replications and summarise their MSEs.

    Failed replications are excluded and counted; more than 20% failures
    raises :class:`ExperimentFailedError`. With a single usable replication
    the standard deviation is reported as 0 and ``std_defined`` is False.
    """
    outcomes = _pmap(lambda k: _try_rep(cfg, k), range(cfg.replications))
    per_rep = [o for o in outcomes if isinstance(o, ReplicationResult)]
    failures = {o.rep_index: str(o.cause) for o in outcomes if isinstance(o, ReplicationError)}
    if len(failures) > MAX_FAILURE_RATE * cfg.replications or not per_rep:
        raise ExperimentFailedError(
            f"{len(failures)} of {cfg.replications} replications failed",
            failures=len(failures),
            replications=cfg.replications,
        )
    errs = np.array([r.mse for r in per_rep])
    std_defined = errs.size >= 2
    return Table1Summary(
        config=cfg,
        mean_mse=float(np.mean(errs)),
        std_mse=float(np.std(errs, ddof=1)) if std_defined else 0.0,
        per_rep=per_rep,
        failures=failures,
        proposal_mean_mse=float(np.mean([np.mean(r.proposal_mse) for r in per_rep])),
        std_defined=std_defined,
    )


def ou_moments(t, x0: float, theta: float = 1.0, sigma: float = 0.1):
    """Mean and variance of the Ornstein-Uhlenbeck marginal at time ``t``."""
    t = np.asarray(t, dtype=np.float64)
    return x0 * np.exp(-theta * t), sigma**2 / (2.0 * theta) * (1.0 - np.exp(-2.0 * theta * t))


def ou_occupation_density(xs, times, x0: float, theta: float = 1.0, sigma: float = 0.1):
    """Average over ``times`` of the Gaussian OU marginal densities at ``xs``."""
    xs = np.asarray(xs, dtype=np.float64)
    mean, var = ou_moments(np.asarray(times), x0, theta, sigma)
    z = (xs[:, None] - mean[None, :]) ** 2 / var[None, :]
    return np.mean(np.exp(-0.5 * z) / np.sqrt(2.0 * np.pi * var[None, :]), axis=1)


@dataclass
class RiskRatePoint:
    N: int
    h: float
    mise: float
    ise_std: float


@dataclass
class RiskRateResult:
    slope: float
    intercept: float
    theory_slope: float
    points: list[RiskRatePoint]
    xs: NDArray[np.float64] = field(repr=False)
    reference: NDArray[np.float64] = field(repr=False)
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "theory_slope": self.theory_slope,
            "points": [vars(p) for p in self.points],
            "meta": self.meta,
        }


def reference_density(
    model: SdeModel,
    cfg: ExperimentConfig,
    n_paths: int,
    pilot_h: float,
    seed: int,
) -> tuple[NDArray, NDArray]:
    """Kernel density of a large independent ensemble on its quantile-trimmed
    grid, used as the target ``f`` when no closed form exists."""
    ens = simulate_ensemble(model, n_paths, cfg.grid, cfg.substeps, seed)
    xs = quantile_grid(ens, cfg.eval_quantile, cfg.eval_points)
    return xs, estimate_density(ens, cfg.kernel, pilot_h, xs).values


def risk_rate_study(
    model: SdeModel,
    Ns: Sequence[int],
    cfg_base: ExperimentConfig,
    reps: int = 20,
    ref_factor: int = 50,
    pilot_h: float = 0.01,
) -> RiskRateResult:
    """Empirical decay of the density MISE with ``h = N^(-1/(2 order + 1))``.

    For each ``N`` the integrated squared error against a reference density
    (from ``ref_factor * max(Ns)`` independent paths) is averaged over
    ``reps`` ensembles; the returned slope is the least-squares fit of
    log MISE on log N.
    """
    Ns = [int(v) for v in Ns]
    if len(set(Ns)) < 3:
        raise ValueError("risk-rate study needs at least three distinct sample sizes")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    beta = cfg_base.kernel.order
    xs, fref = reference_density(model, cfg_base, ref_factor * max(Ns), pilot_h,
                                 derive_seed(cfg_base.base_seed, 0x5EF))

    def one(job):
        N, r = job
        h = N ** (-1.0 / (2 * beta + 1))
        ens = simulate_ensemble(model, N, cfg_base.grid, cfg_base.substeps,
                                derive_seed(cfg_base.base_seed, N, r))
        s0, _ = kernel_sums(ens.states.reshape(-1), None, cfg_base.kernel, h, xs)
        f = s0 / (ens.n * ens.N)
        return float(simpson((f - fref) ** 2, x=xs))

    jobs = [(N, r) for N in Ns for r in range(reps)]
    ises = np.array(_pmap(one, jobs)).reshape(len(Ns), reps)
    points = [
        RiskRatePoint(N, N ** (-1.0 / (2 * beta + 1)), float(np.mean(row)),
                      float(np.std(row, ddof=1)) if reps > 1 else 0.0)
        for N, row in zip(Ns, ises)
    ]
    logN = np.log([p.N for p in points])
    logM = np.log([p.mise for p in points])
    slope, intercept = np.polyfit(logN, logM, 1)
    return RiskRateResult(
        slope=float(slope),
        intercept=float(intercept),
        theory_slope=-2.0 * beta / (2 * beta + 1),
        points=points,
        xs=xs,
        reference=fref,
        meta={"reps": reps, "reference_paths": ref_factor * max(Ns), "pilot_h": pilot_h,
              "model": model.name, "kernel": cfg_base.kernel.name},
    )


def run_all_models(base: ExperimentConfig, model_ids: Sequence[int] = (1, 2, 3, 4)) -> dict[int, Table1Summary]:
    """Table-1 batch: one summary per preset with its default bandwidth grid."""
    out = {}
    for mid in model_ids:
        cfg = ExperimentConfig(**{**_fields(base), "model_id": mid, "model": None,
                                  "bandwidth_grid": None})
        out[mid] = table1_experiment(cfg)
    return out


def _fields(cfg: ExperimentConfig) -> dict:
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}

