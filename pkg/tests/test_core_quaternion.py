import numpy as np
import pytest

from ico3d.core.quaternion import (build_covariance, build_covariances,
                                   eval_gaussian, quat_multiply, quat_to_rotmat,
                                   random_unit_quats, rotmat_to_quat)
from ico3d.errors import InvalidInputError, NumericalSingularityError


def test_covariance_identity_isotropic():
    cov = build_covariance(np.array([1.0, 0, 0, 0]), np.array([1.0, 1.0, 1.0]))
    assert np.allclose(cov, np.eye(3), atol=1e-15)


def test_covariance_axis_aligned_squares():
    cov = build_covariance(np.array([1.0, 0, 0, 0]), np.array([2.0, 1.0, 1.0]))
    assert np.allclose(cov, np.diag([4.0, 1.0, 1.0]), atol=1e-15)


def test_covariance_matches_explicit_product_seed7():
    # Oracle: brute-force R * diag(s) * diag(s) * R^T assembled from scratch.
    rng = np.random.default_rng(7)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    s = rng.uniform(0.2, 2.0, size=3)
    cov = build_covariance(q, s)
    rot = quat_to_rotmat(q)
    oracle = rot @ np.diag(s) @ np.diag(s) @ rot.T
    assert np.abs(cov - oracle).max() <= 1e-12


def test_covariance_rejects_non_unit_quaternion():
    with pytest.raises(InvalidInputError):
        build_covariance(np.array([1.1, 0, 0, 0]), np.array([1.0, 1.0, 1.0]))


def test_covariance_rejects_nonpositive_scale():
    with pytest.raises(InvalidInputError):
        build_covariance(np.array([1.0, 0, 0, 0]), np.array([1.0, 0.0, 1.0]))


def test_covariance_psd_property_10k_seeds():
    # Spec property: Cholesky succeeds on every random (q, s) draw.
    rng = np.random.default_rng(0)
    quats = random_unit_quats(rng, 10_000)
    scales = rng.uniform(0.01, 5.0, size=(10_000, 3))
    covs = build_covariances(quats, scales)
    np.linalg.cholesky(covs)  # raises LinAlgError on any non-PSD member
    eigs = np.sort(np.linalg.eigvalsh(covs), axis=1)
    assert np.allclose(eigs, np.sort(scales ** 2, axis=1), rtol=1e-8, atol=1e-10)


def test_eval_gaussian_peak():
    assert eval_gaussian(np.eye(3), np.zeros(3)) == 1.0


def test_eval_gaussian_unit_offset():
    val = eval_gaussian(np.eye(3), np.array([1.0, 0, 0]))
    assert abs(val - np.exp(-0.5)) < 1e-15


def test_eval_gaussian_matches_explicit_inverse():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a = rng.normal(size=(3, 3))
        cov = a @ a.T + 0.1 * np.eye(3)
        x = rng.normal(size=3)
        oracle = np.exp(-0.5 * x @ np.linalg.inv(cov) @ x)
        assert abs(eval_gaussian(cov, x) - oracle) <= 1e-10


def test_eval_gaussian_monotone_along_rays():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3))
    cov = a @ a.T + 0.05 * np.eye(3)
    for _ in range(20):
        direction = rng.normal(size=3)
        vals = [eval_gaussian(cov, t * direction) for t in np.linspace(0, 3, 12)]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_eval_gaussian_singular_rejected():
    cov = np.diag([1.0, 1.0, 0.0])
    with pytest.raises(NumericalSingularityError):
        eval_gaussian(cov, np.zeros(3))


def test_quat_multiply_matches_rotation_composition():
    rng = np.random.default_rng(5)
    a, b = random_unit_quats(rng, 2)
    lhs = quat_to_rotmat(quat_multiply(a, b))
    rhs = quat_to_rotmat(a) @ quat_to_rotmat(b)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_rotmat_quat_roundtrip():
    rng = np.random.default_rng(9)
    for q in random_unit_quats(rng, 100):
        back = rotmat_to_quat(quat_to_rotmat(q))
        assert min(np.abs(back - q).max(), np.abs(back + q).max()) < 1e-12
