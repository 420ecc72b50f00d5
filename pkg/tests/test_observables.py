import math

import numpy as np
import pytest

from decolens.errors import EmptyDensity, GridMismatch
from decolens.grid import GaussianSpec, GridSpec, density, double_packet, make_gaussian
from decolens.observables import (
    BarrierOutcome,
    LeftFraction,
    RunResult,
    Side,
    Transmitted,
    aggregate,
    center_on_maximum,
    classify_barrier,
    collapse_state,
    collapse_time,
    moments,
)

GRID = GridSpec(1500, 0.02)


def gauss_rho(grid=GRID, sigma=1.5, center=7.5):
    return density(make_gaussian(grid, GaussianSpec(sigma, 0.0, center)))


def fake_run(rho, grid=GRID):
    from decolens.grid import WaveFunction

    psi = WaveFunction.from_complex(grid, np.sqrt(rho).astype(complex))
    t = np.array([0.0])
    return RunResult(grid, t, t, t, t, final_psi=psi)


def test_moments_gaussian():
    mean, var = moments(gauss_rho(), GRID)
    assert mean == pytest.approx(7.5, abs=1e-4)
    assert var == pytest.approx(2.25, abs=1e-4)


def test_moments_symmetric_double_packet():
    grid = GRID
    psi = double_packet(grid, GaussianSpec(1.0, 0.0, 15.0), 10.0, 0.5)
    mean, _ = moments(density(psi), grid)
    assert mean == pytest.approx(15.0, abs=1e-9)


def test_moments_uniform():
    grid = GridSpec(1001, 0.01)
    length = grid.n * grid.dx
    _, var = moments(np.ones(grid.n), grid)
    assert var == pytest.approx(length**2 / 12, rel=1e-3)


def test_moments_empty():
    with pytest.raises(EmptyDensity):
        moments(np.zeros(GRID.n), GRID)


def test_collapse_state_fully_left():
    p, side = collapse_state(gauss_rho(sigma=0.5, center=8.0), GRID, 12.0)
    assert p == pytest.approx(1.0, abs=1e-12)
    assert side is Side.LEFT


def test_collapse_state_symmetric():
    grid = GRID
    psi = double_packet(grid, GaussianSpec(1.5, 0.0, 15.0), 12.0, 0.5)
    p, side = collapse_state(density(psi), grid, 15.0)
    assert p == pytest.approx(0.5, abs=1e-3)
    assert side is Side.NONE


@pytest.mark.parametrize("theta", [0.9, 0.95])
def test_collapse_state_thresholds(theta):
    rho = np.zeros(GRID.n)
    rho[:10] = 0.05
    rho[-10:] = 0.89
    p, side = collapse_state(rho, GRID, 15.0, theta)
    assert p == pytest.approx(0.05 / 0.94)
    assert side is (Side.RIGHT if theta == 0.9 else Side.NONE)


def test_left_right_sum():
    rng = np.random.default_rng(3)
    rho = rng.random(GRID.n)
    for split in (0.3, 4.0, 9.99):
        p_left, _ = collapse_state(rho, GRID, split)
        p_right = float(np.sum(rho[GRID.x >= split]) / np.sum(rho))
        assert p_left + p_right == pytest.approx(1.0, abs=1e-12)


def test_classify_barrier_transmitted():
    t, outcome = classify_barrier(gauss_rho(sigma=0.5, center=10.0), GRID, 6.0)
    assert t == pytest.approx(1.0, abs=1e-12)
    assert outcome is BarrierOutcome.TRANSMITTED


def test_classify_barrier_reflected_and_split():
    rho = gauss_rho(center=8.0)
    assert classify_barrier(rho, GRID, 12.0)[1] is BarrierOutcome.REFLECTED
    t, outcome = classify_barrier(rho, GRID, 8.0)
    assert t == pytest.approx(0.5, abs=1e-2)
    assert outcome is BarrierOutcome.SPLIT


def test_classify_barrier_monotone():
    rho = gauss_rho(center=7.5)
    edge = 7.0
    t0, _ = classify_barrier(rho, GRID, edge)
    moved = rho.copy()
    i_left = int(np.flatnonzero(GRID.x < edge)[-1])
    i_right = int(np.flatnonzero(GRID.x > edge)[0])
    moved[i_right] += moved[i_left]
    moved[i_left] = 0.0
    t1, _ = classify_barrier(moved, GRID, edge)
    assert 0.0 <= t0 < t1 <= 1.0


def test_center_on_maximum_leftmost_tie():
    rho = np.zeros(11)
    rho[[2, 7]] = 1.0
    out = center_on_maximum(rho)
    assert np.argmax(out) == 5
    assert out[10] == 1.0


def test_center_on_maximum_conserves_interior_mass():
    rho = gauss_rho(center=8.0)
    out = center_on_maximum(rho, target=600)
    assert int(np.argmax(out)) == 600
    assert out.sum() == pytest.approx(rho.sum(), rel=1e-12)


def test_aggregate_identical_runs():
    rho = gauss_rho()
    ens = aggregate([fake_run(rho) for _ in range(3)])
    np.testing.assert_allclose(ens.mean_density, rho, atol=1e-12)


def test_aggregate_mirror_runs():
    rho = gauss_rho(center=8.0)
    ens = aggregate([fake_run(rho), fake_run(rho[::-1].copy())])
    np.testing.assert_allclose(ens.mean_density, ens.mean_density[::-1], atol=1e-12)


def test_aggregate_permutation_invariant():
    runs = [fake_run(gauss_rho(sigma=s, center=c)) for s, c in ((1.0, 8.0), (1.5, 12.0), (0.8, 20.0))]
    a = aggregate(runs)
    b = aggregate(runs[::-1])
    np.testing.assert_allclose(a.mean_density, b.mean_density, atol=1e-14)
    np.testing.assert_allclose(a.centered_density, b.centered_density, atol=1e-14)


def test_aggregate_centering_narrows():
    runs = [fake_run(gauss_rho(sigma=0.5, center=c)) for c in (4.0, 7.5, 11.0)]
    ens = aggregate(runs)
    _, var_mean = moments(ens.mean_density, GRID)
    _, var_centered = moments(ens.centered_density, GRID)
    assert var_centered == pytest.approx(0.25, rel=1e-3)
    assert var_centered < var_mean


def test_aggregate_grid_mismatch():
    other = GridSpec(750, 0.02)
    with pytest.raises(GridMismatch):
        aggregate([fake_run(gauss_rho()), fake_run(gauss_rho(other, center=7.0), other)])


def test_collapse_time():
    t = np.arange(6) * 0.1
    assert collapse_time(t, [0.5, 0.97, 0.6, 0.96, 0.99, 0.98]) == pytest.approx(0.3)
    assert collapse_time(t, [0.5, 0.2, 0.04, 0.01, 0.0, 0.0]) == pytest.approx(0.2)
    assert collapse_time(t, [0.99] * 6) == 0.0
    assert collapse_time(t, [0.5, 0.9, 0.99, 0.99, 0.99, 0.6]) is None


def test_probes():
    rho = gauss_rho(center=10.0)
    assert LeftFraction(10.0)(rho, GRID, 0.0) == pytest.approx(0.5, abs=1e-2)
    assert LeftFraction(6.0, velocity=10.0)(rho, GRID, 0.4) == pytest.approx(0.5, abs=1e-2)
    assert Transmitted(10.0)(rho, GRID, 0.0) == pytest.approx(0.5, abs=1e-2)
    assert math.isclose(Transmitted(-1.0)(rho, GRID, 0.0), 1.0)
