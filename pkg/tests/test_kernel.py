import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from hetlab.errors import DomainError, QuadratureError, ValidationError
from hetlab.kernel import (UNIT_BOX, EntranceLaw, GaussianLaw, NuMeasure, SaddleBox, chain_prefactor,
                           exit_direction_prob, exit_time_tail, gaussian_cdf, gaussian_pdf, gaussian_positive_moment,
                           general_variances, h_window, local_limit_prediction, model_variances, psi_nu_integral,
                           two_saddle_prefactor, two_saddle_prefactor_closed, typical_exit_law)
from hetlab.network import Saddle, chain

# independent numpy MC (scripts/oracles/prefactor_mc.py, 1e7 samples, seed 20240611)
H_MC = 0.1250272802736723
H_MC_REL_SE = 0.000799

BOX73 = SaddleBox(1.0, 0.5, 1.0)


# --- geometry and Gaussians


def test_box_invariants():
    with pytest.raises(ValidationError):
        SaddleBox(0.5, 0.5, 1.0)
    with pytest.raises(ValidationError):
        SaddleBox(1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        SaddleBox(1.0, 0.5, 0.9)
    assert SaddleBox.from_dict(BOX73.to_dict()) == BOX73


def test_gaussian_law_positive_variance():
    with pytest.raises(DomainError):
        GaussianLaw(0.0)


@pytest.mark.parametrize("c", [0.1, 0.5, 1.0, 10.0])
def test_density_integrates_to_one(c):
    val, _ = integrate.quad(lambda x: gaussian_pdf(x, c), -np.inf, np.inf, epsabs=0, epsrel=1e-12)
    assert val == pytest.approx(1.0, abs=1e-10)


@given(st.floats(-50, 50), st.floats(0.01, 100))
def test_cdf_symmetry(x, c):
    assert gaussian_cdf(x, c) + gaussian_cdf(-x, c) == pytest.approx(1.0, abs=1e-15)


def test_cdf_far_tail():
    # erfc keeps relative accuracy where 1 - cdf would round to 0
    assert gaussian_cdf(-30.0, 1.0) == pytest.approx(stats.norm.cdf(-30.0), rel=1e-12)


@given(st.floats(-5, 5), st.floats(0.1, 4), st.floats(0.5, 10))
def test_positive_moment_closed_vs_quad(m, sd, p):
    ref, _ = integrate.quad(lambda y: max(m + sd * y, 0.0) ** p * stats.norm.pdf(y), -m / sd, 60,
                            epsabs=0, epsrel=1e-12, limit=200)
    assert gaussian_positive_moment(m, sd, p) == pytest.approx(ref, rel=1e-8, abs=1e-300)


# --- variances


def test_model_variances():
    assert model_variances(Saddle(1.0, 0.5)) == (0.5, 1.0)
    c1, c2 = model_variances(Saddle(0.7, 0.7))
    assert c1 == c2
    assert model_variances(Saddle(0.5, 3.0))[0] == 1.0


@pytest.mark.parametrize("lam,mu", [(1.0, 1.0), (0.3, 2.0), (5.0, 0.5)])
@pytest.mark.parametrize("box", [UNIT_BOX, BOX73, SaddleBox(3.0, 0.2, 4.0)])
def test_constant_field_reduces_to_model(lam, mu, box):
    s = Saddle(lam, mu)
    got = general_variances(s, box, lambda x1, x2: 1.0, lambda x1, x2: (0.6, 0.8))
    assert got == pytest.approx(model_variances(s), rel=1e-10)


def test_variable_field_analytic():
    s = Saddle(1.0, 1.0)
    c1, _ = general_variances(s, UNIT_BOX, lambda x1, y: math.sqrt(1.0 + y), lambda x1, x2: 1.0)
    assert c1 == pytest.approx(5 / 6, rel=1e-8)


def test_variance_quadrature_error():
    s = Saddle(1.0, 1.0)
    with pytest.raises(QuadratureError):
        general_variances(s, UNIT_BOX, lambda x1, y: float("nan"), lambda x1, x2: 1.0)


# --- exit direction and time


def test_exit_direction():
    assert exit_direction_prob(0.0, 0.5) == 0.5
    assert exit_direction_prob(40.0, 0.5) < 1e-300
    assert exit_direction_prob(1.0, 0.5) == pytest.approx(stats.norm.cdf(-math.sqrt(2)), rel=1e-14)
    assert exit_direction_prob(1.0, 0.5) == pytest.approx(0.0786496, abs=5e-8)
    with pytest.raises(DomainError):
        exit_direction_prob(0.0, 0.0)


def test_exit_time_tail_full_window():
    s = Saddle(1.0, 1.0)
    assert exit_time_tail(0.0, 1.0, 0.0, 1.0, 0.0, 1e6, s, 0.01) == pytest.approx(1.0, abs=1e-14)


def test_exit_time_tail_window_form():
    s = Saddle(1.0, 1.0)
    x, R = 0.3, 1.0
    ref, _ = integrate.quad(lambda u: gaussian_pdf(x - u, 0.5), -R, R)
    assert exit_time_tail(x, 1.0, 0.0, 1.0, 0.0, R, s, 0.01) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_exit_time_tail_power_form(eps):
    s = Saddle(1.0, 1.0)
    got = exit_time_tail(0.0, 1.0, 0.0, 1.5, 0.0, 1.0, s, eps)
    assert got == pytest.approx(2 / math.sqrt(math.pi) * eps ** 0.5, rel=1e-14)


def test_exit_time_tail_delay_factor():
    s = Saddle(2.0, 1.0)
    a = exit_time_tail(0.0, 1.0, 0.0, 1.5, 0.0, 1.0, s, 1e-3)
    b = exit_time_tail(0.0, 1.0, 0.0, 1.5, 0.7, 1.0, s, 1e-3)
    assert b / a == pytest.approx(math.exp(-1.4), rel=1e-13)


@pytest.mark.parametrize("args", [(0.0, 1.2, 0.0, 1.0), (0.0, 1.0, 1.0, 1.0), (0.0, 1.0, 0.2, 0.5),
                                  (0.0, 1.0, -0.1, 1.5)])
def test_exit_time_tail_domain(args):
    with pytest.raises(DomainError):
        exit_time_tail(*args[:1], args[1], args[2], args[3], 0.0, 1.0, Saddle(1, 1), 0.01)


# --- nu and the local limit


def test_nu_bare_regime():
    nu = NuMeasure(0.5, 1.0, 1.0, beta_one=False)
    assert nu.cdf(-3.0) == 0.0
    assert nu.cdf(0.0) == 0.0
    assert nu.cdf(4.0) == 16.0


def test_nu_smeared_origin():
    nu = NuMeasure(0.5, 1.0, 1.0, beta_one=True, c2=1.0)
    assert nu.cdf(0.0) == pytest.approx(0.5, rel=1e-12)
    assert nu.cdf(0.0, method="quad") == pytest.approx(0.5, rel=1e-10)
    assert nu.cdf(0.0, method="hermite") == pytest.approx(0.5, rel=1e-6)


@pytest.mark.parametrize("rho", [0.1, 0.3, 0.5, 0.9])
def test_nu_exact_vs_quadrature(rho):
    nu = NuMeasure(rho, 1.3, 0.7, beta_one=True, c2=0.8)
    for z in (-2.0, -0.3, 0.0, 0.4, 2.5):
        assert nu.cdf(z) == pytest.approx(nu.cdf(z, method="quad"), rel=1e-8)


@pytest.mark.parametrize("beta_one", [False, True])
@pytest.mark.parametrize("rho", [0.2, 0.5, 0.95])
def test_nu_monotone_and_polynomial(beta_one, rho):
    nu = NuMeasure(rho, 1.0, 0.5, beta_one=beta_one, c2=1.0)
    z = np.sort(np.random.default_rng(1).uniform(-5, 10, 1000))
    vals = np.array([nu.cdf(v) for v in z])
    assert np.all(np.diff(vals) >= 0)
    C = 1.0 + nu.K * 2 ** nu.power
    assert np.all(vals <= C * (1 + np.maximum(z, 0) ** nu.power) * 10)


def test_nu_rejects_rho():
    with pytest.raises(DomainError):
        NuMeasure(1.0)


def test_nu_density_matches_cdf_derivative():
    nu = NuMeasure(0.4, 1.0, 0.5, beta_one=True, c2=0.7)
    for z in (-0.5, 0.3, 1.7):
        h = 1e-5
        fd = (nu.cdf(z + h) - nu.cdf(z - h)) / (2 * h)
        assert nu.density(z) == pytest.approx(fd, rel=1e-6)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5), st.floats(0.1, 0.99))
def test_h_window_nonnegative(a, b, z, rho):
    lo, hi = min(a, b), max(a, b)
    assert h_window(lo, hi, z, rho) >= 0


def test_local_limit_examples():
    s = Saddle(1.0, 0.5)
    assert local_limit_prediction(0.0, 0.3, 0.3, 0.75, s, UNIT_BOX) == 0.0
    assert local_limit_prediction(0.0, -2.0, 0.0, 0.75, s, UNIT_BOX) == 0.0
    got = local_limit_prediction(0.0, -math.inf, 0.0, 1.0, s, UNIT_BOX)
    assert got == pytest.approx(gaussian_pdf(0.0, 0.5) * 0.5, rel=1e-12)


def test_local_limit_closed_form():
    # beta < 1: R L^{-1/rho} g_{c1}(x) (b^{1/rho} - a^{1/rho})
    s = Saddle(1.0, 0.5)
    got = local_limit_prediction(0.2, 0.0, 1.0, 0.75, s, BOX73)
    assert got == pytest.approx(1.0 / 0.25 * gaussian_pdf(0.2, 0.5), rel=1e-14)


@pytest.mark.parametrize("beta", [0.75, 1.0])
def test_local_limit_additive(beta):
    s = Saddle(1.0, 0.4)
    cuts = [-1.0, -0.2, 0.0, 0.5, 1.3]
    parts = sum(local_limit_prediction(0.1, a, b, beta, s, BOX73) for a, b in zip(cuts, cuts[1:]))
    whole = local_limit_prediction(0.1, cuts[0], cuts[-1], beta, s, BOX73)
    assert parts == pytest.approx(whole, rel=1e-10)


@pytest.mark.parametrize("args", [(0.0, 0.0, 1.0, 0.75, Saddle(1, 1)), (0.0, 0.0, 1.0, 0.4, Saddle(1, 0.5)),
                                  (0.0, 1.0, 0.0, 0.75, Saddle(1, 0.5))])
def test_local_limit_domain(args):
    with pytest.raises(DomainError):
        local_limit_prediction(*args, UNIT_BOX)


# --- typical exit law


def test_typical_case4_gaussian():
    law = typical_exit_law(0.8, Saddle(1.0, 2.0), BOX73)
    assert law.case == 4 and law.alpha_prime == 1.0
    assert law.cdf(0.0) == 0.5
    assert law.pdf(0.0) == pytest.approx(gaussian_pdf(0.0, 0.25))


def test_typical_case1_alpha_one():
    law = typical_exit_law(1.0, Saddle(1.0, 0.5), BOX73, x=0.3)
    assert law.case == 1
    assert law.alpha_prime == 0.5
    assert law.c == pytest.approx(0.5)
    rng = np.random.default_rng(3)
    u = 0.3 + math.sqrt(0.5) * rng.standard_normal(400_000)
    ref = 0.5 * np.abs(u[u >= 0]) ** 0.5
    d = stats.kstest(ref, law.cdf)
    assert d.statistic < 0.005
    assert law.plus_mass() == pytest.approx(stats.norm.cdf(0.3 / math.sqrt(0.5)))


def test_typical_case1_density_integrates():
    law = typical_exit_law(1.0, Saddle(1.0, 0.5), BOX73, x=-0.4)
    val, _ = integrate.quad(law.pdf, 0, 10, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_typical_one_sided_for_alpha_below_one():
    law = typical_exit_law(0.5, Saddle(1.0, 0.5), BOX73, x=0.7)
    samples = law.sample(np.random.default_rng(0), 10_000)
    assert np.all(samples > 0)
    assert law.cdf(0.0) == 0.0
    assert law.plus_mass() == 1.0


def test_typical_case3_and_2():
    law3 = typical_exit_law(0.5, Saddle(1.0, 1.5), BOX73, x=0.4)
    assert law3.case == 3 and law3.alpha_prime == 0.75
    m, _ = law3._gauss_params()
    assert law3.cdf(m - 1e-9) == 0.0 and law3.cdf(m) == 1.0
    law2 = typical_exit_law(1.0, Saddle(1.0, 1.0), BOX73, x=0.0)
    assert law2.case == 2 and not law2.has_density
    with pytest.raises(DomainError):
        law2.pdf(0.1)
    assert law2.sample(np.random.default_rng(0), 100).shape == (100,)


# --- entrance laws and prefactor


def test_entrance_law_validation():
    with pytest.raises(ValidationError):
        EntranceLaw("beta")
    with pytest.raises(ValidationError):
        EntranceLaw("uniform", 1.0, 1.0)
    assert EntranceLaw.from_dict(EntranceLaw("uniform", -3, 3).to_dict()) == EntranceLaw("uniform", -3, 3)


def test_prefactor_point_mass():
    spec = chain(1.0, [(1.0, 0.5), (1.0, 1.0)])
    h = chain_prefactor(spec, BOX73, 0.0)
    assert h == pytest.approx(3 / math.sqrt(math.pi), rel=1e-13)
    assert chain_prefactor(spec, BOX73, 0.0, method="quad") == pytest.approx(h, rel=1e-4)
    nu = NuMeasure.for_saddle(Saddle(1.0, 0.5), BOX73, beta_one=True)
    assert h == pytest.approx(gaussian_pdf(0.0, 0.5) * psi_nu_integral(0.5, nu), rel=1e-8)


def test_prefactor_linear_in_nu():
    nu = NuMeasure(0.5, 1.0, 1.0, beta_one=True, c2=1.0)
    k = 3.7
    nu_k = NuMeasure(0.5, 1.0, 1.0, beta_one=True, c2=1.0, weight=k)
    law = EntranceLaw("normal", 0.0, 1.0)
    assert two_saddle_prefactor(0.5, 0.5, nu_k, law) == pytest.approx(k * two_saddle_prefactor(0.5, 0.5, nu, law),
                                                                       rel=1e-10)


def test_prefactor_against_frozen_mc():
    spec = chain(1.0, [(1.0, 0.5), (1.0, 1.0)])
    law = EntranceLaw("uniform", -3.0, 3.0)
    h = chain_prefactor(spec, UNIT_BOX, law)
    assert abs(h / H_MC - 1) < 4 * H_MC_REL_SE
    assert chain_prefactor(spec, UNIT_BOX, law, method="quad") == pytest.approx(h, rel=1e-4)


def test_prefactor_density_callable():
    law = EntranceLaw("normal", 0.2, 0.8)
    nu = NuMeasure(0.5, 1.0, 1.0, beta_one=True, c2=1.0)
    a = two_saddle_prefactor_closed(0.5, 0.5, nu, law)
    b = two_saddle_prefactor_closed(0.5, 0.5, nu, law.pdf)
    assert a == pytest.approx(b, rel=1e-8)


def test_prefactor_domain():
    with pytest.raises(DomainError):
        chain_prefactor(chain(1.0, [(1, 2), (1, 1)]))
    with pytest.raises(DomainError):
        chain_prefactor(chain(0.5, [(1, 0.5), (1, 1)]))
    with pytest.raises(DomainError):
        two_saddle_prefactor_closed(0.5, 0.5, NuMeasure(0.5), 0.0)
