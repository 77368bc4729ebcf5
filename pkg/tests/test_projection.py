import csv

import numpy as np
import pytest
from scipy import linalg

from plsvm import datagen, kernels
from plsvm.errors import InvalidInputError, SingularSystemError
from plsvm.model import Dataset
from plsvm.projection import decomposition_check, eigen_diagnostics, project_z_on_t


def random_data(n, p, seed, rho=0.5):
    cfg = datagen.GeneratorConfig(n=n, p=p, s=min(2, p), correlation_rho=rho, seed=seed,
                                  noise="logistic")
    return datagen.generate(cfg)[0]


@pytest.mark.parametrize("seed", range(5))
def test_normal_equations_small_instance(seed):
    data = random_data(5, 3, seed)
    spec = kernels.gaussian(0.4)
    rep = project_z_on_t(data, spec, ridge=0.1)
    # independent dense LU solve
    G = kernels.gram(spec, data.T)
    A_ref = linalg.solve(G + 5 * 0.1 * np.eye(5), data.Z, assume_a="gen")
    np.testing.assert_allclose(rep.alpha_matrix, A_ref, rtol=1e-9, atol=1e-12)
    assert np.all(rep.normal_equation_residuals() <= 1e-8)
    np.testing.assert_allclose(rep.residuals, data.Z - G @ rep.alpha_matrix, atol=1e-12)


def test_huge_ridge_kills_fit():
    data = random_data(40, 3, 0)
    rep = project_z_on_t(data, kernels.finite_rank(4), ridge=1e12)
    assert np.abs(rep.alpha_matrix).max() < 1e-10
    np.testing.assert_allclose(rep.residuals, data.Z, atol=1e-9)


def test_realizable_column_zero_residual():
    rng = np.random.default_rng(1)
    spec = kernels.finite_rank(4)
    T = rng.random(30)
    z1 = kernels.features(spec, T) @ np.array([0.3, -1.0, 0.2, 0.5])
    Z = np.column_stack([z1, rng.normal(size=30)])
    data = Dataset(np.ones(30), Z, T)
    rep = project_z_on_t(data, spec, ridge=0.0)
    assert np.linalg.norm(rep.residuals[:, 0]) <= 1e-8 * np.linalg.norm(z1)


def test_ridge_zero_orthogonal_to_gram_columns():
    data = random_data(60, 4, 2)
    spec = kernels.finite_rank(5)
    rep = project_z_on_t(data, spec, ridge=0.0)
    G = rep.gram
    inner = G.T @ rep.residuals
    scale = np.linalg.norm(G, axis=0)[:, None] * np.linalg.norm(rep.residuals, axis=0)[None, :]
    assert np.all(np.abs(inner) <= 1e-8 * scale)


def test_ridge_zero_on_zero_gram_raises():
    affine_zero = kernels.finite_rank(1, feature_map=lambda X: np.zeros((len(X), 1)))
    data = random_data(10, 2, 3)
    with pytest.raises(SingularSystemError, match="ridge > 0"):
        project_z_on_t(data, affine_zero, ridge=0.0)


def test_invalid_inputs():
    data = random_data(10, 2, 3)
    with pytest.raises(InvalidInputError):
        project_z_on_t(data, kernels.finite_rank(3), ridge=-1.0)
    with pytest.raises(InvalidInputError):
        project_z_on_t(data.subset([0]), kernels.finite_rank(3))


def test_eigen_diagnostics_identity_design():
    # columns +-1 in a Hadamard pattern give Z'Z/n = I; a constant-free kernel fit with
    # a huge ridge leaves Z_T = Z
    H = linalg.hadamard(8)[:, 1:4].astype(float)
    data = Dataset(np.ones(8), H, np.linspace(0, 1, 8))
    rep = project_z_on_t(data, kernels.finite_rank(2), ridge=1e14)
    lmin, lmax = eigen_diagnostics(rep)
    assert lmin == pytest.approx(1.0, abs=1e-9) and lmax == pytest.approx(1.0, abs=1e-12)


def test_eigen_diagnostics_duplicate_columns():
    data = random_data(50, 2, 4)
    dup = Dataset(data.y, np.column_stack([data.Z, data.Z[:, 0]]), data.T)
    rep = project_z_on_t(dup, kernels.finite_rank(3))
    lmin, lmax = eigen_diagnostics(rep)
    assert lmin <= 1e-8 * lmax
    assert lmax >= lmin >= -1e-8 * lmax


def test_eigen_diagnostics_isotropic_gaussian():
    rng = np.random.default_rng(5)
    data = Dataset(np.ones(2000), rng.standard_normal((2000, 5)), rng.random(2000))
    rep = project_z_on_t(data, kernels.finite_rank(3))
    lmin, _ = eigen_diagnostics(rep)
    assert 0.8 <= lmin <= 1.2


def test_eigen_diagnostics_permutation_invariant():
    data = random_data(80, 4, 6)
    spec = kernels.gaussian(0.3)
    perm = np.random.default_rng(7).permutation(80)
    a = eigen_diagnostics(project_z_on_t(data, spec))
    b = eigen_diagnostics(project_z_on_t(data.subset(perm), spec))
    np.testing.assert_allclose(a, b, rtol=1e-9)


def test_decomposition_beta_zero():
    data = random_data(40, 3, 8)
    rep = project_z_on_t(data, kernels.finite_rank(4), ridge=0.0)
    g = lambda T: np.sin(3 * T[:, 0])
    lhs, p1, p2, gap = decomposition_check(np.zeros(3), g, data, rep)
    assert p1 == 0.0 and gap <= 1e-10
    assert lhs == pytest.approx(np.mean(np.sin(3 * data.T[:, 0]) ** 2))


def test_decomposition_cancellation():
    data = random_data(40, 3, 9)
    rep = project_z_on_t(data, kernels.finite_rank(4), ridge=0.0)
    beta = np.array([1.0, -0.5, 2.0])
    T_index = {tuple(t): i for i, t in enumerate(data.T)}
    g = lambda T: -np.array([rep.fitted[T_index[tuple(t)]] @ beta for t in T])
    lhs, p1, p2, gap = decomposition_check(beta, g, data, rep)
    assert p2 <= 1e-20
    assert lhs == pytest.approx(np.mean((rep.residuals @ beta) ** 2), rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_decomposition_realizable(seed):
    rng = np.random.default_rng(seed)
    spec = kernels.finite_rank(5)
    T = rng.random(100)
    F = kernels.features(spec, T)
    Z = F @ rng.normal(size=(5, 3)) + rng.normal(size=(100, 3))
    data = Dataset(np.ones(100), Z, T)
    rep = project_z_on_t(data, spec, ridge=0.0)
    w = rng.normal(size=5)
    g = lambda TT: kernels.features(spec, TT) @ w
    lhs, p1, p2, gap = decomposition_check(rng.normal(size=3), g, data, rep)
    assert gap <= 1e-6 * lhs


def test_report_csv(tmp_path):
    data = random_data(30, 3, 10)
    rep = project_z_on_t(data, kernels.finite_rank(3))
    path = tmp_path / "proj.csv"
    rep.to_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert [r["kind"] for r in rows] == ["column"] * 3 + ["summary"]
    assert float(rows[-1]["lambda_min_residual"]) == rep.lambda_min_residual
    assert rep.lambda_max_Z >= rep.lambda_min_residual
