import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from driftkit.bandwidth import H1, H2
from driftkit.errors import ExperimentFailedError, ReplicationError, SimulationDivergedError
from driftkit.estimators import EstimateCurve
from driftkit.experiments import (
    ExperimentConfig,
    derive_seed,
    mse,
    ou_moments,
    ou_occupation_density,
    risk_rate_study,
    run_replication,
    table1_experiment,
    worker_count,
)
from driftkit.sde import SdeModel, make_preset


def zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


BROWNIAN = SdeModel(drift=zero, diffusion=lambda x: np.full(np.shape(x), 0.1), x0=2.0, name="brownian")


def test_mse_exact_curve_is_zero():
    xs = np.linspace(-1, 1, 5)
    assert mse(EstimateCurve(xs, -xs, "drift"), lambda x: -x) == 0.0


def test_mse_three_points():
    curve = EstimateCurve([-1.0, 0.0, 1.0], [0.0, 0.0, 0.0], "drift")
    assert mse(curve, lambda x: -np.asarray(x)) == pytest.approx(2 / 3, rel=1e-15)


def test_mse_rejects_other_kinds():
    with pytest.raises(ValueError):
        mse(EstimateCurve([0.0], [1.0], "density"), zero)


@settings(max_examples=30)
@given(seed=st.integers(0, 1000))
def test_mse_reindexing_invariance(seed):
    rng = np.random.default_rng(seed)
    xs, vals = rng.normal(size=20), rng.normal(size=20)
    perm = rng.permutation(20)
    a = mse(EstimateCurve(xs, vals, "drift"), np.sin)
    b = mse(EstimateCurve(xs[perm], vals[perm], "drift"), np.sin)
    assert a == pytest.approx(b, rel=1e-14)


def test_config_defaults():
    cfg = ExperimentConfig()
    assert (cfg.N, cfg.n, cfg.T, cfg.t0, cfg.x0) == (50, 50, 5.0, 1.0, 2.0)
    assert cfg.bandwidth_grid.hs == H1
    assert ExperimentConfig(model_id=3).bandwidth_grid.hs == H2
    assert ExperimentConfig(model_id=4).bandwidth_grid.hs == H2
    assert cfg.as_dict()["bandwidth_grid"] == list(H1)
    with pytest.raises(ValueError):
        ExperimentConfig(t0=5.0, T=5.0)
    with pytest.raises(ValueError):
        ExperimentConfig(replications=0)


def test_seeds_are_keyed():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert 0 <= derive_seed(0, 0) < 2**64


def test_replication_deterministic():
    cfg = ExperimentConfig(N=12, n=20, replications=2, base_seed=4)
    a, b = run_replication(cfg, 1), run_replication(cfg, 1)
    assert a.seed == b.seed
    assert a.selected_h == b.selected_h and a.mse == b.mse
    assert np.array_equal(a.curve.values, b.curve.values)
    assert a.selected_h in cfg.bandwidth_grid.hs
    assert a.mse >= 0 and len(a.proposal_mse) == len(H1)
    assert a.mse == a.proposal_mse[a.cv.selected_index]
    assert run_replication(cfg, 0).seed != a.seed


def test_zero_drift_model_is_estimated_small():
    cfg = ExperimentConfig(model_id=None, model=BROWNIAN, replications=10, base_seed=5)
    summary = table1_experiment(cfg)
    small = [np.max(np.abs(r.curve.values)) <= 0.5 for r in summary.per_rep]
    assert sum(small) >= 9
    assert summary.mean_mse < 1e-3


def test_forced_identical_seeds_give_zero_std():
    cfg = ExperimentConfig(N=10, n=10, replications=2, rep_seeds=(42, 42))
    s = table1_experiment(cfg)
    assert s.std_mse == 0.0
    assert s.per_rep[0].mse == s.per_rep[1].mse


def test_single_replication_flags_std():
    s = table1_experiment(ExperimentConfig(N=10, n=10, replications=1))
    assert s.std_mse == 0.0 and not s.std_defined


def test_summary_permutation_invariance():
    seeds = tuple(derive_seed(3, k) for k in range(4))
    a = table1_experiment(ExperimentConfig(N=10, n=10, replications=4, rep_seeds=seeds))
    b = table1_experiment(ExperimentConfig(N=10, n=10, replications=4, rep_seeds=seeds[::-1]))
    assert a.mean_mse == pytest.approx(b.mean_mse, rel=1e-14)
    assert a.std_mse == pytest.approx(b.std_mse, rel=1e-12)


def test_threads_do_not_change_results(monkeypatch):
    cfg = ExperimentConfig(N=10, n=10, replications=3, base_seed=8)
    monkeypatch.setenv("DRIFTKIT_THREADS", "1")
    assert worker_count() == 1
    serial = table1_experiment(cfg)
    monkeypatch.setenv("DRIFTKIT_THREADS", "3")
    assert worker_count() == 3
    threaded = table1_experiment(cfg)
    assert [r.mse for r in serial.per_rep] == [r.mse for r in threaded.per_rep]


def test_failure_policy():
    blow = SdeModel(drift=lambda x: np.asarray(x, dtype=float) ** 3, diffusion=zero, x0=1.0, name="blowup")
    cfg = ExperimentConfig(model_id=None, model=blow, N=3, n=5, T=50.0, replications=3)
    with pytest.raises(ReplicationError) as info:
        run_replication(cfg, 2)
    assert info.value.rep_index == 2
    assert isinstance(info.value.cause, SimulationDivergedError)
    with pytest.raises(ExperimentFailedError) as info:
        table1_experiment(cfg)
    assert info.value.failures == 3


def test_partial_failures_within_policy(monkeypatch):
    import driftkit.experiments as ex

    real = ex.run_replication

    def sometimes(cfg, k):
        if k == 0:
            raise ReplicationError(k, SimulationDivergedError(0, 1.0))
        return real(cfg, k)

    monkeypatch.setattr(ex, "run_replication", sometimes)
    s = table1_experiment(ExperimentConfig(N=8, n=8, replications=5))
    assert s.failure_count == 1 and len(s.per_rep) == 4
    with pytest.raises(ExperimentFailedError):
        table1_experiment(ExperimentConfig(N=8, n=8, replications=4))


def test_ou_moments_closed_form():
    mean, var = ou_moments(5.0, 2.0, 1.0, 0.1)
    assert mean == pytest.approx(0.013475893998, rel=1e-10)
    assert var == pytest.approx(0.0049997730, rel=1e-7)


def test_ou_occupation_density_integrates_to_one():
    times = np.linspace(1, 5, 51)[:-1]
    xs = np.linspace(-1, 3, 8001)
    f = ou_occupation_density(xs, times, 2.0)
    assert trapezoid(f, xs) == pytest.approx(1.0, abs=1e-6)
    # pointwise against an independent quadrature of the Gaussian marginals
    mean, var = ou_moments(times, 2.0)
    x = 0.3
    direct = np.mean([math.exp(-(x - m) ** 2 / (2 * v)) / math.sqrt(2 * math.pi * v) for m, v in zip(mean, var)])
    assert f[np.searchsorted(xs, x)] == pytest.approx(direct, rel=1e-3)


def test_risk_rate_requires_three_sizes():
    with pytest.raises(ValueError):
        risk_rate_study(make_preset(1), [25, 50, 50], ExperimentConfig(), reps=2)


def test_risk_rate_small_run_decreasing():
    cfg = ExperimentConfig(base_seed=1)
    res = risk_rate_study(make_preset(1), [10, 40, 160], cfg, reps=5, ref_factor=10)
    assert res.theory_slope == pytest.approx(-2 / 3)
    mises = [p.mise for p in res.points]
    assert mises[-1] < mises[0]
    assert res.slope < 0
    assert [p.h for p in res.points] == pytest.approx([n ** (-1 / 3) for n in (10, 40, 160)])


def test_reference_density_matches_ou_mixture():
    """Cross-check of the simulated reference against the closed-form OU mixture."""
    from driftkit.experiments import reference_density

    cfg = ExperimentConfig()
    xs, fref = reference_density(make_preset(1), cfg, 4000, 0.02, seed=11)
    mix = ou_occupation_density(xs, cfg.grid.times[:-1], 2.0)
    # smoothing at the pilot bandwidth and Euler bias dominate the gap
    assert np.max(np.abs(fref - mix)) <= 0.05 * mix.max()
