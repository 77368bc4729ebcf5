import math

import numpy as np
import pytest

from plsvm import kernels
from plsvm.errors import InvalidInputError
from plsvm.kernels import AnalyticFiniteRank, AnalyticPolyDecay, EmpiricalSpectrum

# Frozen outputs of tests/oracles/poly_decay_oracle.py (term-by-term mpmath sums
# with an integral tail bracket; bisection at 40 digits).
Q_POLY_A1_N100_R05 = 0.0946009549025924  # midpoint of [0.0946009549019314, 0.0946009549032528]
NU_POLY = {
    (1, 1000): 0.010762521910010029,
    (1, 10000): 0.0049979185507944726,
    (2, 1000): 0.0036665367659874696,
    (2, 10000): 0.0014650038598649425,
}


def affine_map(X):
    return np.column_stack([np.ones(len(X)), X[:, 0]])


def test_gram_affine_feature_map():
    spec = kernels.finite_rank(2, feature_map=affine_map)
    np.testing.assert_allclose(kernels.gram(spec, [0.0, 1.0]), [[1.0, 1.0], [1.0, 2.0]])


def test_gram_gaussian_repeated_point():
    G = kernels.gram(kernels.gaussian(1.0), [0.3, 0.3])
    np.testing.assert_allclose(G, np.ones((2, 2)))


def test_gram_gaussian_off_diagonal():
    G = kernels.gram(kernels.gaussian(1.0), [0.0, 0.5])
    assert G[0, 1] == pytest.approx(math.exp(-0.125), rel=1e-14)
    assert G[0, 1] == pytest.approx(0.88250, abs=5e-6)


def test_gram_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        kernels.gram(kernels.gaussian(1.0, domain_dim=2), np.zeros((3, 3)))
    with pytest.raises(InvalidInputError):
        kernels.gram(kernels.finite_rank(3), [0.5, 1.5])


SPECS = [kernels.finite_rank(5), kernels.poly_decay(1.0), kernels.poly_decay(2.0, n_terms=64),
         kernels.gaussian(0.3), kernels.gaussian(0.5, domain_dim=2)]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.family}")
def test_gram_symmetric_psd(spec):
    rng = np.random.default_rng(0)
    for _ in range(100):
        X = rng.random((int(rng.integers(1, 30)), spec.domain_dim))
        G = kernels.gram(spec, X)
        assert np.array_equal(G, G.T)
        assert np.linalg.eigvalsh(G)[0] >= -1e-8 * np.linalg.norm(G, 2)


@pytest.mark.parametrize("spec", SPECS[:3], ids=lambda s: f"{s.family}")
def test_features_factor_gram(spec):
    X = np.random.default_rng(1).random((20, 1))
    F = kernels.features(spec, X)
    np.testing.assert_allclose(F @ F.T, kernels.gram(spec, X), atol=1e-12)
    Y = np.random.default_rng(2).random((7, 1))
    np.testing.assert_allclose(kernels.gram(spec, X, Y), kernels.gram(spec, Y, X).T, atol=1e-12)


def test_legendre_features_orthonormal():
    x, w = np.polynomial.legendre.leggauss(20)
    t = (x + 1) / 2
    Phi = kernels.legendre_features(t, 6)
    np.testing.assert_allclose(Phi.T @ (Phi * (w / 2)[:, None]), np.eye(6), atol=1e-12)


@pytest.mark.parametrize("spec", [kernels.finite_rank(4), kernels.finite_rank(2, feature_map=affine_map),
                                  kernels.poly_decay(1.0, n_terms=32), kernels.gaussian(0.2)],
                         ids=["legendre", "custom", "poly", "gauss"])
def test_kappa_is_max_diagonal(spec):
    t = np.linspace(0, 1, 2001)
    diag = np.diag(kernels.gram(spec, t))
    assert kernels.kappa(spec) == pytest.approx(diag.max(), rel=1e-9)


@pytest.mark.parametrize("text,family", [("finite_rank:m=6", "finite_rank"),
                                         ("poly_decay:alpha=1.5,n_terms=64", "poly_decay"),
                                         ("gaussian:sigma=0.2,d=2", "gaussian")])
def test_parse_kernel(text, family):
    assert kernels.parse_kernel(text).family == family


@pytest.mark.parametrize("text", ["nope", "finite_rank", "finite_rank:m=x", "gaussian:sigma=1,foo=2",
                                  "poly_decay:alpha=0.4", "finite_rank:m"])
def test_parse_kernel_rejects(text):
    with pytest.raises(InvalidInputError):
        kernels.parse_kernel(text)


# spectra

def test_spectrum_eigenvalues():
    np.testing.assert_array_equal(AnalyticFiniteRank(3, 2.0).eigenvalues(5), [2, 2, 2, 0, 0])
    np.testing.assert_allclose(AnalyticPolyDecay(1.0, 3.0).eigenvalues(3), [3, 3 / 4, 3 / 9])
    ev = EmpiricalSpectrum([0.1, 0.5, 0.3]).eigenvalues(4)
    np.testing.assert_allclose(ev, [0.5, 0.3, 0.1, 0.0])


def test_empirical_spectrum_scaled_by_n():
    X = np.random.default_rng(3).random((40, 1))
    G = kernels.gram(kernels.gaussian(0.3), X)
    sp = kernels.empirical_spectrum(G)
    assert sum(sp.eigenvalues(40)) == pytest.approx(np.trace(G) / 40, rel=1e-10)


def test_q_n_finite_rank_example():
    assert kernels.q_n(AnalyticFiniteRank(4, 1.0), 100, 0.1) == pytest.approx(0.02, rel=1e-15)


def test_q_n_empty_spectrum():
    assert kernels.q_n(EmpiricalSpectrum([]), 17, 0.3) == 0.0


def test_q_n_poly_decay_against_oracle():
    assert kernels.q_n(AnalyticPolyDecay(1.0, 1.0), 100, 0.5) == pytest.approx(
        Q_POLY_A1_N100_R05, rel=1e-10)
    # closed form for this case: 0.25 + 0.25 + (pi^2/6 - 1 - 1/4)
    assert kernels.q_n(AnalyticPolyDecay(1.0, 1.0), 100, 0.5) == pytest.approx(
        math.sqrt(math.pi ** 2 / 6 - 0.75) / 10, rel=1e-13)


@pytest.mark.parametrize("n,r", [(0, 0.1), (10, 0.0), (10, -1.0), (2.5, 0.1)])
def test_q_n_rejects(n, r):
    with pytest.raises(InvalidInputError):
        kernels.q_n(AnalyticFiniteRank(2, 1.0), n, r)


@pytest.mark.parametrize("spectrum", [AnalyticFiniteRank(4, 1.0), AnalyticPolyDecay(1.0, 1.0),
                                      AnalyticPolyDecay(2.5, 0.3), EmpiricalSpectrum([1, 0.5, 0.01])])
def test_q_n_monotone_and_sublinear(spectrum):
    rs = np.geomspace(1e-4, 3.0, 60)
    q = np.array([kernels.q_n(spectrum, 50, r) for r in rs])
    assert np.all(np.diff(q) >= 0)
    assert np.all(q[1:] <= rs[1:] / rs[:-1] * q[:-1] * (1 + 1e-12))


@pytest.mark.parametrize("spectrum", [AnalyticFiniteRank(4, 1.0), AnalyticPolyDecay(1.0, 1.0),
                                      EmpiricalSpectrum([1, 0.5, 0.01])])
@pytest.mark.parametrize("n", [1, 37, 1000])
def test_q_n_quarter_n_halves(spectrum, n):
    for r in (1e-3, 0.05, 0.7):
        assert kernels.q_n(spectrum, 4 * n, r) == pytest.approx(kernels.q_n(spectrum, n, r) / 2,
                                                                rel=1e-15)


def test_q_n_rank_bound():
    sp = EmpiricalSpectrum([2.0, 1.0, 0.0, 0.0])
    for r in (0.01, 0.5, 3.0):
        assert kernels.q_n(sp, 10, r) <= r * math.sqrt(2 / 10) + 1e-15


def test_nu_n_finite_rank_example():
    assert kernels.nu_n(AnalyticFiniteRank(4, 1.0), 100) == pytest.approx(0.005, rel=1e-8)


@pytest.mark.parametrize("m", [1, 2, 4, 8, 50])
@pytest.mark.parametrize("n", [1, 100, 10 ** 4, 10 ** 6])
def test_nu_n_finite_rank_closed_form(m, n):
    assert kernels.nu_n(AnalyticFiniteRank(m, 1.0), n) == pytest.approx(
        math.sqrt(m / n) / 40, rel=1e-6)


def test_nu_n_zero_spectrum():
    assert kernels.nu_n(EmpiricalSpectrum([0.0]), 100) == 0.0
    assert kernels.nu_n(EmpiricalSpectrum([]), 100) == 0.0


@pytest.mark.parametrize("key", sorted(NU_POLY))
def test_nu_n_poly_decay_against_oracle(key):
    alpha, n = key
    assert kernels.nu_n(AnalyticPolyDecay(alpha, 1.0), n) == pytest.approx(NU_POLY[key], rel=1e-8)


@pytest.mark.parametrize("spectrum", [AnalyticFiniteRank(3, 0.5), AnalyticPolyDecay(1.0, 1.0),
                                      AnalyticPolyDecay(3.0, 10.0), EmpiricalSpectrum([5, 1, 0.1]),
                                      AnalyticFiniteRank(2, 1e-9)])
@pytest.mark.parametrize("n", [1, 30, 5000])
def test_nu_n_fixed_point_and_minimality(spectrum, n):
    nu = kernels.nu_n(spectrum, n)
    gap = 40 * nu ** 2 - kernels.q_n(spectrum, n, nu)
    assert 0 <= gap <= 1e-6 * nu ** 2
    eps = 1e-4 * nu
    assert 40 * (nu - eps) ** 2 < kernels.q_n(spectrum, n, nu - eps)


def test_nu_n_custom_constant():
    assert kernels.nu_n(AnalyticFiniteRank(4, 1.0), 100, constant=10.0) == pytest.approx(0.02, rel=1e-8)


def test_gamma_n_examples():
    assert kernels.gamma_n(AnalyticFiniteRank(4, 1.0), 100, 1000) == pytest.approx(
        math.sqrt(math.log(1000) / 100), rel=1e-14)
    assert kernels.gamma_n(AnalyticFiniteRank(4, 1.0), 100, 1000) == pytest.approx(0.26283, abs=5e-6)
    assert kernels.gamma_n(EmpiricalSpectrum([0.0]), 100, log_p=100.0) == 1.0


def test_gamma_n_nu_dominates():
    # 40 nu^2 = nu sqrt(m/n) at nu = 0.5 with n = 100 needs m = 40000 eigenvalues of level 1
    sp = AnalyticFiniteRank(40_000, 1.0)
    assert kernels.nu_n(sp, 100) == pytest.approx(0.5, rel=1e-8)
    assert kernels.gamma_n(sp, 100, 2) == pytest.approx(0.5, rel=1e-8)


@pytest.mark.parametrize("p", [0, 1])
def test_gamma_n_rejects_small_p(p):
    with pytest.raises(InvalidInputError):
        kernels.gamma_n(AnalyticFiniteRank(2, 1.0), 10, p)


def test_spectrum_of():
    assert isinstance(kernels.spectrum_of(kernels.finite_rank(3)), AnalyticFiniteRank)
    assert isinstance(kernels.spectrum_of(kernels.poly_decay(1.0)), AnalyticPolyDecay)
    with pytest.raises(InvalidInputError):
        kernels.spectrum_of(kernels.gaussian(0.3))
    sp = kernels.spectrum_of(kernels.gaussian(0.3), np.linspace(0, 1, 10))
    assert isinstance(sp, EmpiricalSpectrum)


def test_gram_factor_gaussian():
    X = np.random.default_rng(4).random((25, 1))
    F = kernels.gram_factor(kernels.gaussian(0.2), X)
    np.testing.assert_allclose(F @ F.T, kernels.gram(kernels.gaussian(0.2), X), atol=1e-10)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_nu_n_poly_decay_exponent(alpha):
    ns = np.array([1e3, 3e3, 1e4, 3e4, 1e5])
    nu2 = [kernels.nu_n(AnalyticPolyDecay(alpha, 1.0), n) ** 2 for n in ns]
    slope = np.polyfit(np.log(ns), np.log(nu2), 1)[0]
    assert slope == pytest.approx(-2 * alpha / (2 * alpha + 1), abs=0.02)
