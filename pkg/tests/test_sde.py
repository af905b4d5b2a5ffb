import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftkit.errors import InvalidModelError, SimulationDivergedError
from driftkit.sde import (
    ObservationGrid,
    PathEnsemble,
    SdeModel,
    make_preset,
    path_generator,
    simulate_ensemble,
)

from conftest import BENCH_GRID


def zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def test_preset_values():
    m1 = make_preset(1)
    assert m1.x0 == 2.0
    assert float(m1.drift(2.0)) == -2.0
    assert float(m1.diffusion(2.0)) == 0.1
    assert float(make_preset(2).diffusion(0.0)) == pytest.approx(0.1)
    assert float(make_preset(2).diffusion(1.0)) == pytest.approx(0.1 * math.sqrt(2))
    assert float(make_preset(3).drift(0.5)) == pytest.approx(-(0.5 + math.sin(2.0)))
    assert float(make_preset(4).diffusion(0.0)) == pytest.approx(0.3)
    assert float(make_preset(4).drift(1.0)) == pytest.approx(-(1 + math.sin(4)))


@pytest.mark.parametrize("bad", [0, 5, 9, "x", 1.5, None])
def test_unknown_preset(bad):
    with pytest.raises(InvalidModelError):
        make_preset(bad)


def test_model_rejects_non_finite_coefficients():
    with pytest.raises(InvalidModelError):
        SdeModel(drift=lambda x: 1.0 / np.asarray(x), diffusion=zero, x0=0.0)


def test_grid():
    g = ObservationGrid(1.0, 5.0, 50)
    t = g.times
    assert t.size == 51 and t[0] == 1.0 and t[-1] == 5.0
    assert np.allclose(np.diff(t), 0.08, atol=1e-15)
    assert ObservationGrid.from_times(t) == g
    with pytest.raises(ValueError):
        ObservationGrid(2.0, 1.0, 3)
    with pytest.raises(ValueError):
        ObservationGrid(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        ObservationGrid.from_times([0.0, 0.1, 0.5])


def test_ensemble_validation():
    g = ObservationGrid(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        PathEnsemble(g, np.zeros((2, 4)))
    with pytest.raises(ValueError):
        PathEnsemble(g, np.array([[0.0, np.nan, 1.0]]))
    with pytest.raises(ValueError):
        PathEnsemble(g, np.zeros((0, 3)))


def test_deterministic_constant_model():
    m = SdeModel(drift=zero, diffusion=zero, x0=2.0, name="still")
    ens = simulate_ensemble(m, 7, ObservationGrid(1.0, 5.0, 10), substeps=3, seed=1)
    assert np.all(ens.values == 2.0)


def test_same_seed_identical():
    m = make_preset(4)
    a = simulate_ensemble(m, 20, BENCH_GRID, 10, seed=123)
    b = simulate_ensemble(m, 20, BENCH_GRID, 10, seed=123)
    assert np.array_equal(a.values, b.values)
    c = simulate_ensemble(m, 20, BENCH_GRID, 10, seed=124)
    assert not np.array_equal(a.values, c.values)


def test_paths_use_their_own_streams():
    m = make_preset(2)
    big = simulate_ensemble(m, 12, BENCH_GRID, 5, seed=9)
    small = simulate_ensemble(m, 5, BENCH_GRID, 5, seed=9)
    # path i depends only on (seed, i), not on how many paths are simulated
    assert np.array_equal(big.values[:5], small.values)
    assert not np.array_equal(big.values[0], big.values[1])


def test_streams_disjoint():
    a = path_generator(5, 0).standard_normal(1000)
    b = path_generator(5, 1).standard_normal(1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15


def test_block_boundary_does_not_matter(monkeypatch):
    import driftkit.sde as sde

    m = make_preset(3)
    ref = simulate_ensemble(m, 9, ObservationGrid(1.0, 2.0, 4), 2, seed=3)
    monkeypatch.setattr(sde, "_BLOCK", 4)
    again = simulate_ensemble(m, 9, ObservationGrid(1.0, 2.0, 4), 2, seed=3)
    assert np.array_equal(ref.values, again.values)


def _ode_endpoint_error(substeps):
    m = SdeModel(drift=lambda x: -np.asarray(x), diffusion=zero, x0=2.0, name="ou-noiseless")
    ens = simulate_ensemble(m, 1, BENCH_GRID, substeps, seed=0)
    return abs(ens.values[0, -1] - 2.0 * math.exp(-5.0))


@pytest.mark.parametrize("substeps", [1, 2, 5, 10, 20])
def test_euler_first_order(substeps):
    ratio = _ode_endpoint_error(substeps) / _ode_endpoint_error(2 * substeps)
    assert 1.5 <= ratio <= 2.5


def test_burn_in_when_t0_not_a_multiple_of_step():
    m = SdeModel(drift=lambda x: -np.asarray(x), diffusion=zero, x0=1.0)
    g = ObservationGrid(0.55, 1.55, 4)  # step 0.25; t0 / step = 2.2
    ens = simulate_ensemble(m, 1, g, 1, seed=0)
    assert ens.values[0, 0] == pytest.approx(math.exp(-0.55), rel=0.1)
    assert ens.values[0, 0] == pytest.approx((1 - 0.55 / 3) ** 3, rel=1e-12)


def test_t0_zero_starts_at_x0():
    ens = simulate_ensemble(make_preset(1), 4, ObservationGrid(0.0, 1.0, 5), 2, seed=0)
    assert np.all(ens.values[:, 0] == 2.0)


def test_divergence_names_path_and_time():
    m = SdeModel(drift=lambda x: np.asarray(x) ** 3, diffusion=zero, x0=1.0, name="blowup")
    with pytest.raises(SimulationDivergedError) as info:
        simulate_ensemble(m, 3, ObservationGrid(1.0, 50.0, 10), 1, seed=0)
    assert info.value.path_index == 0
    assert info.value.time > 0


def test_ou_moments_small():
    """Moment check at modest N (the 10 000-path version is in the acceptance suite)."""
    ens = simulate_ensemble(make_preset(1), 2000, BENCH_GRID, 10, seed=77)
    xt = ens.values[:, -1]
    mean, var = 2 * math.exp(-5), 0.01 / 2 * (1 - math.exp(-10))
    assert abs(xt.mean() - mean) <= 3 * xt.std(ddof=1) / math.sqrt(xt.size)
    assert abs(xt.var(ddof=1) - var) <= 3 * var * math.sqrt(2 / (xt.size - 1))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), N=st.integers(1, 4))
def test_determinism_property(seed, N):
    g = ObservationGrid(0.5, 1.5, 3)
    a = simulate_ensemble(make_preset(2), N, g, 2, seed)
    b = simulate_ensemble(make_preset(2), N, g, 2, seed)
    assert np.array_equal(a.values, b.values)
    assert np.all(np.isfinite(a.values))
