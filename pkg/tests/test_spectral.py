import math

import numpy as np
import pytest

from oracles import abs_matrix_sqrtm
from saddlelab.errors import NotCriticalError
from saddlelab.objectives import quadratic_form, trig_multiwell
from saddlelab.spectral import (
    classify_critical_point,
    inclusion_check,
    matrix_abs,
    modified_distance,
)


def _random_symmetric(rng, d):
    M = rng.normal(size=(d, d))
    return (M + M.T) / 2.0


def test_classify_reference_saddle(f_saddle):
    info = classify_critical_point(f_saddle, np.zeros(2))
    assert info.classification == "saddle"
    np.testing.assert_allclose(info.eigenvalues, [1.0, -1.0])
    assert info.kappa == pytest.approx(1.0)


def test_classify_isotropic_minimum(f_bowl):
    info = classify_critical_point(f_bowl, np.zeros(2))
    assert info.classification == "minimum"
    np.testing.assert_allclose(info.eigenvalues, [1.0, 1.0])
    assert info.kappa == pytest.approx(1.0)


def test_classify_trig_saddle():
    f = trig_multiwell(2)
    info = classify_critical_point(f, np.array([math.pi, 0.0]))
    assert info.classification == "saddle"
    np.testing.assert_allclose(sorted(info.eigenvalues), [-1.0, 1.0])
    assert info.kappa == pytest.approx(1.0)


def test_classify_kappa_and_order():
    f = quadratic_form(np.diag([10.0, -0.1]))
    info = classify_critical_point(f, np.zeros(2))
    assert info.kappa == pytest.approx(100.0)
    # eigenvalues descending, eigenvectors are matching orthonormal columns
    assert info.eigenvalues[0] > info.eigenvalues[1]
    V = info.eigenvectors
    np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-12)
    H = f.hessian(np.zeros(2))
    np.testing.assert_allclose(V.T @ H @ V, np.diag(info.eigenvalues),
                               atol=1e-12)


def test_classify_rejects_noncritical(f_saddle):
    with pytest.raises(NotCriticalError) as exc:
        classify_critical_point(f_saddle, np.array([0.5, 0.0]))
    # the error reports the offending gradient norm
    assert "gradient norm" in str(exc.value)
    assert "5.0" in str(exc.value)


def test_classify_degenerate():
    f = quadratic_form(np.diag([1.0, 0.0]))
    info = classify_critical_point(f, np.zeros(2))
    assert info.classification == "degenerate"
    assert info.kappa is None


def test_matrix_abs_against_sqrtm_oracle():
    rng = np.random.default_rng(7)
    for d in (2, 3, 6):
        for _ in range(3):
            H = _random_symmetric(rng, d)
            ours = matrix_abs(H)
            oracle = abs_matrix_sqrtm(H)
            assert np.max(np.abs(ours - oracle)) <= 1e-9
            assert np.max(np.abs(ours - ours.T)) == 0.0
            assert np.min(np.linalg.eigvalsh(ours)) >= -1e-12


def test_matrix_abs_fixed_cases():
    np.testing.assert_allclose(matrix_abs(np.diag([1.0, -1.0])), np.eye(2))
    H = np.array([[0.0, 2.0], [2.0, 0.0]])
    np.testing.assert_allclose(matrix_abs(H), 2.0 * np.eye(2), atol=1e-12)


def test_modified_distance_norm_sandwich():
    rng = np.random.default_rng(11)
    H = _random_symmetric(rng, 4) + np.eye(4) * 0.1
    abs_eigs = np.abs(np.linalg.eigvalsh(H))
    lo, hi = math.sqrt(abs_eigs.min()), math.sqrt(abs_eigs.max())
    for _ in range(20):
        x = rng.normal(size=4)
        dt = modified_distance(H, x)
        nx = np.linalg.norm(x)
        assert lo * nx - 1e-9 <= dt <= hi * nx + 1e-9


def test_modified_distance_reference_saddle():
    H = np.diag([1.0, -1.0])
    # |H| is the identity here, so the modified distance is Euclidean
    assert modified_distance(H, np.array([3.0, 4.0])) == pytest.approx(5.0)


def test_inclusion_check_random_batches():
    rng = np.random.default_rng(13)
    for d in (2, 5):
        H = _random_symmetric(rng, d) + np.eye(d) * 0.05
        samples = rng.normal(size=(200, d))
        rep = inclusion_check(H, samples)
        assert rep.passed
        assert rep.n_samples == 200
        assert rep.worst_margin <= 1e-9


def test_eigenvector_sign_is_canonical(f_saddle):
    # the largest-magnitude entry of each eigenvector is positive, so
    # repeated classifications give bit-identical frames
    a = classify_critical_point(f_saddle, np.zeros(2))
    b = classify_critical_point(f_saddle, np.zeros(2))
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)
    for j in range(a.eigenvectors.shape[1]):
        col = a.eigenvectors[:, j]
        assert col[np.argmax(np.abs(col))] > 0
