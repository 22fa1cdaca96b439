"""
Tests for plate forces, potentials and sampled assumption constants
"""
import numpy as np
import pytest

from src.exceptions import ParameterError
from src.plate_models import (
    airy_solve, assumption_report, check_coercivity, estimate_lipschitz, force, force_field, make_model,
    potential, potential_bound, sample_h2_ball, vk_bracket,
)
from src.plate_spectral_basis import spectral_sobolev_norm
from src.profiles import sample_profile
from src.verification import gradient_consistency

# wide enough that truncation dominates rounding at every step
EPSILONS = (1e-2, 1e-3, 1e-4)


def _kirchhoff(basis, **params):
    defaults = {'nu': 0.5, 'q': 2.0, 'r': 0.0, 'mu': 0.1, 'f': 'cubic', 'f_scale': 1.0}
    defaults.update(params)
    h = sample_profile({'type': 'quartic_bump', 'amplitude': 0.01}, basis.grid)
    return make_model('kirchhoff', basis, params=defaults, h=h, a=0.5)


def test_zero_model_is_inert(basis):
    model = make_model('zero', basis)
    eta = np.array([0.1, -0.2, 0.05, 0.0])
    assert np.all(force(model, basis, eta) == 0.0)
    assert potential(model, basis, eta) == 0.0


def test_kirchhoff_force_is_gradient_of_potential(basis):
    result = gradient_consistency(_kirchhoff(basis), basis, basis.k_max, epsilons=EPSILONS)
    assert result['passed'], result


def test_kirchhoff_sine_nonlinearity_is_consistent(basis):
    model = _kirchhoff(basis, f='sine', f_scale=2.0, nu=0.0)
    result = gradient_consistency(model, basis, basis.k_max, epsilons=EPSILONS)
    assert result['passed'], result


def test_berger_force_is_gradient_of_potential(basis):
    model = make_model('berger', basis, params={'nu': 1.0, 'G': 5.0},
                       h=sample_profile({'type': 'sine_bump', 'amplitude': 0.01}, basis.grid))
    result = gradient_consistency(model, basis, basis.k_max, epsilons=EPSILONS)
    assert result['passed'], result


def test_von_karman_force_is_gradient_of_potential(basis):
    F0 = sample_profile({'type': 'quartic_bump', 'amplitude': 0.5}, basis.grid)
    model = make_model('von_karman', basis, F0=F0)
    result = gradient_consistency(model, basis, basis.k_max, epsilons=EPSILONS)
    assert result['passed'], result


def test_linear_kirchhoff_potential_is_exact_quadratic(basis):
    model = make_model('kirchhoff', basis, params={'f': 'linear', 'f_scale': 3.0}, a=0.5)
    eta = np.array([0.2, 0.1, -0.1, 0.05])
    field = basis.synthesize(eta)
    assert potential(model, basis, eta) == pytest.approx(1.5 * basis.grid.cell_area * float(field @ field), rel=1e-12)
    np.testing.assert_allclose(force_field(model, basis, field), 3.0 * field, atol=1e-14)


def test_bracket_of_quadratic_fields(grid):
    X, Y = grid.coordinates()
    w = X**2
    u = Y**2
    bracket = vk_bracket(grid, w, u)
    # w_xx u_yy = 4 away from the boundary rows where the zero extension enters
    np.testing.assert_allclose(bracket[1:-1, 1:-1], 4.0, rtol=1e-10)


def test_airy_of_flat_plate_is_zero(basis):
    airy = airy_solve(basis, np.zeros(basis.grid.size))
    assert airy.residual == 0.0
    assert np.all(airy.v == 0.0)


def test_airy_solves_the_bracket_equation(basis):
    eta = 0.1 * basis.W[:, 0]
    airy = airy_solve(basis, eta)
    rhs = -basis.grid.cell_area * np.ravel(vk_bracket(basis.grid, eta, eta))
    assert airy.residual <= 1e-10
    np.testing.assert_allclose(basis.B @ airy.v, rhs, atol=1e-10 * np.abs(rhs).max())
    # quadratic in eta
    doubled = airy_solve(basis, 2.0 * eta)
    np.testing.assert_allclose(doubled.v, 4.0 * airy.v, rtol=1e-9, atol=1e-14)


def test_airy_rejects_wrong_shape(basis):
    with pytest.raises(ParameterError):
        airy_solve(basis, np.zeros(basis.grid.size + 1))


def test_berger_requires_positive_nu(basis):
    with pytest.raises(ParameterError):
        make_model('berger', basis, params={'nu': 0.0})


def test_kirchhoff_rejects_bad_exponents(basis):
    with pytest.raises(ParameterError):
        make_model('kirchhoff', basis, params={'q': 1.0, 'r': 2.0}, a=0.5)


def test_kirchhoff_rejects_order_outside_unit_interval(basis):
    with pytest.raises(ParameterError):
        make_model('kirchhoff', basis, params={}, a=1.5)


def test_kirchhoff_rejects_steep_negative_slope(basis):
    with pytest.raises(ParameterError):
        make_model('kirchhoff', basis, params={'f': 'linear', 'f_scale': -1e6}, a=0.5)


def test_unknown_model_kind(basis):
    with pytest.raises(ParameterError):
        make_model('timoshenko', basis)


def test_kappa_override_outside_range(basis):
    with pytest.raises(ParameterError):
        make_model('berger', basis, params={'nu': 1.0}, kappa=0.5, C_star=0.0)


def test_kirchhoff_defaults_with_load(basis):
    model = _kirchhoff(basis, f='linear', f_scale=0.5)
    assert 0.0 < model.kappa < 0.5
    assert model.C_star >= 0.0
    assert model.eps == pytest.approx(0.25)
    assert model.gamma_prime < model.lambda1**2


def test_coercivity_holds_for_defaults(basis):
    for model in (_kirchhoff(basis), make_model('berger', basis, params={'nu': 1.0, 'G': 5.0}),
                  make_model('von_karman', basis)):
        report = check_coercivity(model, basis, R=1.0, n_samples=200, seed=7)
        assert report['pass'], report
        assert report['min_margin'] >= -1e-12


def test_h2_ball_samples_stay_inside(basis, rng):
    samples = sample_h2_ball(basis, basis.k_max, 2.0, 500, rng)
    norms = [spectral_sobolev_norm(basis, c, 2.0) for c in samples]
    assert max(norms) <= 2.0 + 1e-12


def test_lipschitz_needs_enough_samples(basis):
    model = make_model('berger', basis, params={'nu': 1.0})
    with pytest.raises(ParameterError):
        estimate_lipschitz(model, basis, 1.0, 0.0, 50)


def test_lipschitz_of_zero_model_is_zero(basis):
    assert estimate_lipschitz(make_model('zero', basis), basis, 1.0, 0.0, 100) == 0.0


def test_lipschitz_is_reproducible_for_a_seed(basis):
    model = make_model('berger', basis, params={'nu': 1.0, 'G': 2.0})
    first = estimate_lipschitz(model, basis, 1.0, 0.0, 100, seed=11)
    second = estimate_lipschitz(model, basis, 1.0, 0.0, 100, seed=11)
    assert first == second
    assert first > 0.0


def test_potential_bound_covers_initial_value(basis):
    model = make_model('berger', basis, params={'nu': 1.0, 'G': 5.0})
    eta0 = np.array([0.01, 0.0, 0.005, 0.0])
    assert potential_bound(model, basis, eta0, n_samples=100) >= potential(model, basis, eta0)


def test_assumption_report_is_labelled_empirical(basis):
    model = make_model('berger', basis, params={'nu': 1.0})
    coercivity = check_coercivity(model, basis, 1.0, n_samples=50)
    report = assumption_report(model, basis, 1.0, 0.3, 1234, coercivity)
    assert report['label'] == 'empirical'
    assert report['model'] == 'Berger'
    assert report['C_R'] == pytest.approx(0.3)
