import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from badband.cube import HyperspectralCube, centralize, compute_band_stats
from badband.linalg import (
    BandTransform,
    RidgeExhaustedError,
    apply_band_transform,
    covariance,
    factorize,
    spd_solve,
)


def centered_cube(rs, L, n, mix=True):
    x = rs.standard_normal((L, n))
    if mix:
        x = rs.standard_normal((L, L)) @ x + rs.normal(0, 5, (L, 1))
    cube = HyperspectralCube(1, n, x)
    return centralize(cube, compute_band_stats(cube))


def naive_covariance(cube):
    L, n = cube.data.shape
    K = np.zeros((L, L))
    for k in range(n):
        r = cube.data[:, k]
        K += np.outer(r, r)
    return K / n


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_two_pixel_covariance():
    cube = HyperspectralCube(1, 2, [[1.0, -1.0], [0.0, 0.0]])
    model = covariance(cube)
    assert np.array_equal(model.K, [[1.0, 0.0], [0.0, 0.0]])
    assert model.ridge_applied > 0


def test_single_pixel_degenerate():
    cube = HyperspectralCube(1, 1, [[3.0], [4.0]])
    cube = centralize(cube, compute_band_stats(cube))
    model = covariance(cube)
    assert np.array_equal(model.K, np.zeros((2, 2)))
    assert model.degenerate and model.ridge_applied == pytest.approx(1e-2)


def test_covariance_matches_outer_product_oracle(rs):
    cube = centered_cube(rs, 4, 50)
    model = covariance(cube)
    assert rel(model.K, naive_covariance(cube)) < 1e-12
    assert model.ridge_applied == 0.0
    assert np.array_equal(model.K, model.K.T)


def test_covariance_blocked_large_n(rs):
    cube = centered_cube(rs, 5, 5000)
    assert rel(covariance(cube).K, naive_covariance(cube)) < 1e-12


def test_covariance_needs_centered(rs):
    with pytest.raises(ValueError):
        covariance(HyperspectralCube(1, 10, rs.normal(3, 1, (2, 10))))


def test_factor_reproduces_K(rs):
    model = covariance(centered_cube(rs, 6, 80))
    F = model.factor
    assert rel(F @ F.T, model.K) < 1e-12


def test_ridge_on_duplicate_band(rs):
    x = rs.standard_normal((3, 100))
    x = np.vstack([x, x[1:2]])
    cube = HyperspectralCube(1, 100, x)
    cube = centralize(cube, compute_band_stats(cube))
    model = covariance(cube)
    L = 4
    base = np.trace(model.K) / L
    assert model.ridge_applied >= 1e-8 * base * (1 - 1e-12)
    assert model.ridge_applied <= 1e-2 * base * (1 + 1e-12)
    F = model.factor
    assert rel(F @ F.T, model.K + model.ridge_applied * np.eye(L)) < 1e-8


def test_ridge_exhausted():
    # a negative eigenvalue larger than the top ridge can never be fixed
    K = np.array([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(RidgeExhaustedError):
        factorize(K)


def test_spd_solve_identity_and_diagonal():
    eye = factorize(np.eye(2))
    np.testing.assert_array_equal(spd_solve(eye, [3.0, 4.0]), [3.0, 4.0])
    diag = factorize(np.diag([2.0, 5.0]))
    np.testing.assert_allclose(spd_solve(diag, [2.0, 5.0]), [1.0, 1.0], rtol=1e-15)


@pytest.mark.parametrize("L", [2, 5, 10])
def test_spd_solve_matches_explicit_inverse(rs, L):
    A = rs.standard_normal((L, L))
    K = A @ A.T + np.eye(L)
    b = rs.standard_normal(L)
    x = spd_solve(factorize(K), b)
    assert rel(x, np.linalg.inv(K) @ b) < 1e-9
    assert np.linalg.norm(K @ x - b) <= 1e-8 * np.linalg.norm(b)


def test_spd_solve_rejects_nonfinite():
    with pytest.raises(ValueError):
        spd_solve(factorize(np.eye(2)), [1.0, np.inf])


def test_transforms(rs):
    cube = HyperspectralCube(2, 3, rs.standard_normal((3, 6)))
    same = apply_band_transform(cube, BandTransform(diagonal=np.ones(3)))
    assert np.array_equal(same.data, cube.data)
    doubled = apply_band_transform(cube, BandTransform(diagonal=np.full(3, 2.0)))
    assert np.array_equal(doubled.data, 2 * cube.data)
    A = rs.standard_normal((3, 3))
    full = apply_band_transform(cube, BandTransform(matrix=A))
    for k in range(6):
        oracle = [sum(A[i, j] * cube.data[j, k] for j in range(3)) for i in range(3)]
        np.testing.assert_allclose(full.data[:, k], oracle, rtol=1e-12, atol=1e-14)


def test_transform_validation(rs):
    with pytest.raises(ValueError):
        BandTransform(diagonal=[1.0, 0.0])
    with pytest.raises(ValueError):
        BandTransform(matrix=np.ones((2, 2)))
    cube = HyperspectralCube(1, 2, rs.standard_normal((3, 2)))
    with pytest.raises(ValueError):
        apply_band_transform(cube, BandTransform(diagonal=[1.0, 2.0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_covariance_transform_algebra(seed, L):
    rs = np.random.default_rng(seed)
    cube = centered_cube(rs, L, 60)
    A = rs.standard_normal((L, L)) + 2 * np.eye(L)
    if np.linalg.cond(A) > 1e3:
        return
    K = covariance(cube).K
    Kt = covariance(apply_band_transform(cube, BandTransform(matrix=A))).K
    assert rel(Kt, A @ K @ A.T) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_covariance_permutation_equivariant(seed):
    rs = np.random.default_rng(seed)
    cube = centered_cube(rs, 6, 40)
    p = rs.permutation(6)
    K = covariance(cube).K
    Kp = covariance(cube.with_data(cube.data[p])).K
    np.testing.assert_allclose(Kp, K[np.ix_(p, p)], rtol=1e-12, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solve_then_multiply_reproduces_rhs(seed):
    rs = np.random.default_rng(seed)
    model = covariance(centered_cube(rs, 7, 100))
    b = rs.standard_normal(7)
    x = spd_solve(model, b)
    assert np.linalg.norm(model.K @ x - b) <= 1e-8 * np.linalg.norm(b)
