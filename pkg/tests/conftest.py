import numpy as np
import pytest
from hypothesis import strategies as st

from driftkit.sde import ObservationGrid, PathEnsemble, make_preset, simulate_ensemble

BENCH_GRID = ObservationGrid(1.0, 5.0, 50)


def close(a, b, tol):
    """|a - b| <= tol * max(1, |b|)."""
    return abs(a - b) <= tol * max(1.0, abs(b))


@st.composite
def small_ensembles(draw, min_paths=1, max_paths=5, max_n=6):
    N = draw(st.integers(min_paths, max_paths))
    n = draw(st.integers(1, max_n))
    t0 = draw(st.floats(0.0, 2.0))
    span = draw(st.floats(0.1, 5.0))
    vals = draw(st.lists(st.floats(-2.0, 2.0, allow_nan=False), min_size=N * (n + 1),
                         max_size=N * (n + 1)))
    grid = ObservationGrid(t0, t0 + span, n)
    return PathEnsemble(grid, np.array(vals).reshape(N, n + 1))


bandwidths = st.floats(0.1, 2.0)


def as_lists(ens):
    return ens.values.tolist(), ens.grid.T - ens.grid.t0


def random_ensemble(rng, N, n, t0=0.0, T=1.0, scale=1.0):
    return PathEnsemble(ObservationGrid(t0, T, n), scale * rng.standard_normal((N, n + 1)))


@pytest.fixture(scope="session")
def model1_bench():
    return simulate_ensemble(make_preset(1), 50, BENCH_GRID, 10, seed=2022)
