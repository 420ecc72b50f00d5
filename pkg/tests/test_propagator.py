import numpy as np
import pytest

from decolens.errors import UnstableParameters
from decolens.grid import GaussianSpec, GridSpec, WaveFunction, density, make_gaussian, norm
from decolens.observables import moments
from decolens.propagator import Potential, StepParams, apply_h, bootstrap, n_steps, propagate, step
from oracles import crank_nicolson, expm_propagate, free_sigma

REF_GRID = GridSpec(750, 0.02)
K0 = 2.5 * np.pi


def ref_packet():
    return make_gaussian(REF_GRID, GaussianSpec(1.5, K0, 7.5))


def small_setup():
    g = GridSpec(64, 0.1)
    return g, make_gaussian(g, GaussianSpec(0.5, 1.0, g.x_max / 2))


def l2(a, b, dx):
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2) * dx))


def test_default_step_is_quarter_alpha():
    p = StepParams.for_grid(REF_GRID)
    assert p.tau == pytest.approx(0.0002)
    assert p.alpha == pytest.approx(0.25)


def test_stability_bound_enforced():
    g = REF_GRID
    p = StepParams.for_grid(g)
    p.check(Potential.barrier(g, K0**2, 10.0, 0.5))
    with pytest.raises(UnstableParameters):
        StepParams(1.2 * g.dx**2, g.dx).check(Potential.free(g))
    with pytest.raises(UnstableParameters):
        p.check(Potential.barrier(g, 3000.0, 10.0, 0.5))


def test_barrier_descriptor_matches_values():
    g = REF_GRID
    v = Potential.barrier(g, 5.0, 10.0, 0.5)
    inside = (g.x >= 10.0) & (g.x <= 10.5)
    assert np.all(v.values[inside] == 5.0) and np.all(v.values[~inside] == 0.0)
    assert v.right_edge == pytest.approx(10.5)


def test_potential_must_be_finite():
    with pytest.raises(ValueError):
        Potential(np.array([0.0, np.inf, 0.0]))


def test_apply_h_matches_dense_matrix():
    from oracles import hamiltonian

    g, psi = small_setup()
    v = np.linspace(0, 3, g.n)
    ref = np.zeros(g.n)
    ref[1:-1] = hamiltonian(g.n, g.dx, v) @ psi.re[1:-1]
    np.testing.assert_allclose(apply_h(psi.re, v, g.dx), ref, atol=1e-12)


def test_bootstrap_plus_one_step_matches_expm():
    g, psi = small_setup()
    p = StepParams.for_grid(g)
    out = step(bootstrap(psi, Potential.free(g), p), Potential.free(g), p)
    ref = expm_propagate(psi.psi, g.dx, p.tau)
    assert l2(out.psi, ref, g.dx) < 1e-6


def test_bootstrap_of_zero_is_zero():
    g = GridSpec(64, 0.1)
    b = bootstrap(WaveFunction.zeros(g), Potential.free(g), StepParams.for_grid(g))
    assert not b.im_half.any() and not b.re.any()


def half_sine(g):
    x = np.arange(g.n)
    psi = np.sin(np.pi * x / (g.n - 1))
    psi /= np.sqrt(np.sum(psi**2) * g.dx)
    return WaveFunction.from_complex(g, psi)


def test_box_ground_state_is_stationary():
    g = REF_GRID
    psi = half_sine(g)
    p = StepParams.for_grid(g)
    out = propagate(psi, Potential.free(g), p, 1000 * p.tau)
    assert np.max(np.abs(density(out) - density(psi))) < 1e-6
    b = bootstrap(psi, Potential.free(g), p)
    assert np.max(np.abs(b.re - psi.re)) < 1e-8 and np.max(np.abs(b.im - psi.im)) < 1e-8


def test_tiny_step_changes_psi_by_order_tau():
    g = REF_GRID
    psi = ref_packet()
    v = Potential.free(g)
    bound = np.max(np.abs(apply_h(psi.re, v.values, g.dx)) + np.abs(apply_h(psi.im, v.values, g.dx)))
    for tau in (g.dx**2 / 200, g.dx**2 / 2000):
        out = step(psi, v, StepParams(tau, g.dx))
        change = max(np.max(np.abs(out.re - psi.re)), np.max(np.abs(out.im - psi.im)))
        assert change <= 1.01 * tau * bound


def test_norm_conserved_over_many_steps():
    g = REF_GRID
    p = StepParams.for_grid(g)
    psi = make_gaussian(g, GaussianSpec(1.5, 0.0, 7.5))
    out = propagate(psi, Potential.free(g), p, 10_000 * p.tau)
    assert abs(norm(out) - 1) < 1e-4


def test_single_step_norm_drift():
    g = REF_GRID
    p = StepParams.for_grid(g)
    psi = bootstrap(ref_packet(), Potential.free(g), p)
    out = step(psi, Potential.free(g), p)
    assert abs(norm(out) - norm(psi)) < 1e-9


def test_propagate_duration_zero_is_identity():
    psi = ref_packet()
    assert propagate(psi, Potential.free(REF_GRID), StepParams.for_grid(REF_GRID), 0.0) is psi


def test_n_steps_rounding():
    assert n_steps(0.4, 0.0002) == 2000
    assert n_steps(0.00045, 0.0002) == 2


def test_translation_and_spreading_at_reference_parameters():
    g = REF_GRID
    psi = ref_packet()
    out = propagate(psi, Potential.free(g), StepParams.for_grid(g), 0.4)
    mean, var = moments(density(out), g)
    assert mean - 7.5 == pytest.approx(K0 * 0.4, rel=0.01)
    assert np.sqrt(var) == pytest.approx(free_sigma(1.5, 0.4), rel=0.01)


def _combination_error(ca, cb):
    g = REF_GRID
    p = StepParams.for_grid(g)
    v = Potential.free(g)
    a = make_gaussian(g, GaussianSpec(1.5, K0, 7.0))
    b = make_gaussian(g, GaussianSpec(1.2, -3.0, 8.0))
    both = WaveFunction.from_complex(g, ca * a.psi + cb * b.psi)
    lhs = propagate(both, v, p, 0.1).psi
    rhs = ca * propagate(a, v, p, 0.1).psi + cb * propagate(b, v, p, 0.1).psi
    return np.max(np.abs(lhs - rhs))


def test_linearity_real_coefficients():
    assert _combination_error(0.7, -1.3) < 1e-8


def test_linearity_complex_coefficients_to_scheme_order():
    # R and I live on staggered levels, so multiplying by i is exact only to O(tau^2)
    assert _combination_error(0.3 - 0.2j, 1.1j) < 1e-5


def test_continuation_matches_single_call():
    g = REF_GRID
    p = StepParams.for_grid(g)
    v = Potential.free(g)
    psi = ref_packet()
    once = propagate(psi, v, p, 0.02)
    twice = propagate(propagate(psi, v, p, 0.01), v, p, 0.01)
    np.testing.assert_array_equal(once.re, twice.re)
    np.testing.assert_array_equal(once.im, twice.im)


def test_barrier_transmission_matches_crank_nicolson():
    g = GridSpec(2000, 0.02)
    psi = make_gaussian(g, GaussianSpec(1.5, K0, 12.0))
    v = Potential.barrier(g, K0**2, 16.5, 0.5)
    p = StepParams.for_grid(g)
    out = propagate(psi, v, p, 1.0)
    ref = crank_nicolson(psi.psi, g.dx, p.tau, n_steps(1.0, p.tau), v.values)
    beyond = g.x > v.right_edge
    t = np.sum(density(out)[beyond]) * g.dx
    r = np.sum(density(out)[~beyond]) * g.dx
    t_ref = np.sum(np.abs(ref[beyond]) ** 2) * g.dx
    assert t + r == pytest.approx(1.0, abs=1e-3)
    assert t == pytest.approx(t_ref, abs=1e-2)
