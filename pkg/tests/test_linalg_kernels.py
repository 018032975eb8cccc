import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barriermpc.linalg_kernels import (
    CombinatorialLimitError,
    adjugate,
    decompose_inverse_plus_diagonal,
    det,
    det_plus_diagonal,
    padded_adjugate,
    padded_inverse,
    principal_submatrix,
    reconstruct_inverse,
    subsets,
    woodbury_inverse,
)


def rng_matrix(seed, n, symmetric=False, psd=False):
    rng = np.random.default_rng(seed)
    M = rng.uniform(-2.0, 2.0, size=(n, n))
    if psd:
        return M @ M.T
    if symmetric:
        return 0.5 * (M + M.T)
    return M


# ---------------------------------------------------------------------------
# adjugate


def test_adjugate_2x2_closed_form():
    M = np.array([[3.0, 5.0], [-2.0, 7.0]])
    np.testing.assert_allclose(adjugate(M), [[7.0, -5.0], [2.0, 3.0]])


def test_adjugate_identity():
    np.testing.assert_allclose(adjugate(np.eye(4)), np.eye(4))


def test_adjugate_singular_matrix_is_nonzero():
    M = np.array([[1.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(adjugate(M), [[1.0, -1.0], [-1.0, 1.0]])
    np.testing.assert_allclose(adjugate(M) @ M, np.zeros((2, 2)), atol=1e-14)


def test_adjugate_1x1_is_one():
    np.testing.assert_allclose(adjugate(np.array([[7.0]])), [[1.0]])
    np.testing.assert_allclose(adjugate(np.array([[0.0]])), [[1.0]])


def test_adjugate_0x0():
    assert adjugate(np.zeros((0, 0))).shape == (0, 0)


def test_adjugate_rejects_large_matrices():
    with pytest.raises(CombinatorialLimitError):
        adjugate(np.eye(13))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_adjugate_identity_property(seed, n):
    M = rng_matrix(seed, n)
    d = det(M)
    tol = 1e-9 * (1.0 + abs(d)) * max(1.0, np.linalg.norm(M, np.inf) ** n)
    np.testing.assert_allclose(adjugate(M) @ M, d * np.eye(n), atol=tol)
    np.testing.assert_allclose(M @ adjugate(M), d * np.eye(n), atol=tol)


# ---------------------------------------------------------------------------
# principal submatrices and padding


def test_principal_submatrix_selects_rows_and_cols():
    M = np.arange(16, dtype=float).reshape(4, 4)
    sigma = np.array([1, 0, 1, 0], dtype=bool)
    np.testing.assert_allclose(principal_submatrix(M, sigma), [[0.0, 2.0], [8.0, 10.0]])


def test_principal_submatrix_empty_set():
    assert principal_submatrix(np.eye(3), np.zeros(3, dtype=bool)).shape == (0, 0)


def test_padded_inverse_round_trip():
    M = rng_matrix(11, 5, psd=True) + np.eye(5)
    sigma = np.array([1, 1, 0, 1, 0], dtype=bool)
    P = padded_inverse(M, sigma)
    keep = np.flatnonzero(sigma)
    np.testing.assert_allclose(
        P[np.ix_(keep, keep)] @ M[np.ix_(keep, keep)], np.eye(3), atol=1e-12
    )
    assert np.all(P[:, ~sigma] == 0.0) and np.all(P[~sigma, :] == 0.0)


def test_padded_adjugate_zero_pattern():
    M = rng_matrix(12, 4)
    sigma = np.array([0, 1, 1, 0], dtype=bool)
    P = padded_adjugate(M, sigma)
    assert np.all(P[:, ~sigma] == 0.0) and np.all(P[~sigma, :] == 0.0)
    sub = principal_submatrix(M, sigma)
    np.testing.assert_allclose(
        principal_submatrix(P, sigma) @ sub, det(sub) * np.eye(2), atol=1e-12
    )


def test_sigma_length_mismatch_raises():
    with pytest.raises(ValueError):
        principal_submatrix(np.eye(3), np.array([1, 0], dtype=bool))


# ---------------------------------------------------------------------------
# determinant subset expansion


def test_det_empty_convention():
    assert det(np.zeros((0, 0))) == 1.0


def test_det_plus_diagonal_worked_example():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert det_plus_diagonal(A, np.array([2.0, 3.0])) == pytest.approx(11.0)


def test_subsets_count():
    assert len(list(subsets(5))) == 32


def test_subsets_limit():
    with pytest.raises(CombinatorialLimitError):
        list(subsets(13))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_det_plus_diagonal_matches_direct(seed, n):
    A = rng_matrix(seed, n, psd=True)
    lam = np.random.default_rng(seed + 1).uniform(0.1, 3.0, size=n)
    direct = np.linalg.det(A + np.diag(lam))
    np.testing.assert_allclose(
        det_plus_diagonal(A, lam), direct, rtol=1e-9, atol=1e-12 * max(1.0, abs(direct))
    )


# ---------------------------------------------------------------------------
# inverse subset expansion


def test_decompose_diagonal_example():
    A = np.diag([1.0, 2.0])
    terms, h = decompose_inverse_plus_diagonal(A, np.array([1.0, 1.0]))
    assert h == pytest.approx(6.0)
    np.testing.assert_allclose(reconstruct_inverse(terms), np.diag([0.5, 1.0 / 3.0]))
    assert sum(w for _, w, _ in terms) == pytest.approx(1.0)


def test_decompose_singular_submatrix_uses_adjugate():
    # A has a zero eigenvalue, so the full active set hits the adjugate branch.
    A = np.diag([4.0, 0.0])
    terms, h = decompose_inverse_plus_diagonal(A, np.array([1.0, 1.0]))
    assert h == pytest.approx(5.0)
    np.testing.assert_allclose(reconstruct_inverse(terms), np.diag([0.2, 1.0]))
    full = next(t for t in terms if t[0].all())
    np.testing.assert_allclose(full[2], padded_adjugate(A, np.array([True, True])))


def test_decompose_rejects_nonpositive_lam():
    with pytest.raises(ValueError):
        decompose_inverse_plus_diagonal(np.eye(2), np.array([1.0, 0.0]))


def test_decompose_rejects_indefinite():
    with pytest.raises(ValueError):
        decompose_inverse_plus_diagonal(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.1, 0.1]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_decompose_reconstructs_inverse(seed, n):
    A = rng_matrix(seed, n, psd=True)
    lam = np.random.default_rng(seed + 7).uniform(0.05, 4.0, size=n)
    terms, _ = decompose_inverse_plus_diagonal(A, lam)
    target = A + np.diag(lam)
    np.testing.assert_allclose(reconstruct_inverse(terms) @ target, np.eye(n), atol=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_decompose_weights_sum_to_one(seed, n):
    A = rng_matrix(seed, n, psd=True)
    lam = np.random.default_rng(seed + 13).uniform(0.05, 4.0, size=n)
    terms, _ = decompose_inverse_plus_diagonal(A, lam)
    # Weights of the invertible branches form the convex combination; singular
    # branches carry adjugates whose weight is the same det-free coefficient.
    weights = [w for sigma, w, _ in terms]
    assert all(w >= -1e-12 for w in weights)
    assert sum(weights) <= 1.0 + 1e-9


# ---------------------------------------------------------------------------
# Woodbury identity


def test_woodbury_rank_one_example():
    A = np.eye(2)
    U = np.array([[1.0], [0.0]])
    C = np.array([[1.0]])
    V = np.array([[1.0, 0.0]])
    np.testing.assert_allclose(woodbury_inverse(A, U, C, V), np.diag([0.5, 1.0]))


def test_woodbury_shape_mismatch():
    with pytest.raises(ValueError):
        woodbury_inverse(np.eye(2), np.ones((2, 1)), np.eye(1), np.ones((2, 2)))


def test_woodbury_singular_capacitance():
    A = np.eye(1)
    U = np.array([[1.0]])
    C = np.array([[-1.0]])
    V = np.array([[1.0]])
    with pytest.raises(np.linalg.LinAlgError):
        woodbury_inverse(A, U, C, V)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 4))
def test_woodbury_matches_direct_inverse(seed, n, k):
    rng = np.random.default_rng(seed)
    A = rng_matrix(seed, n, psd=True) + np.eye(n)
    U = rng.uniform(-1.0, 1.0, size=(n, k))
    C = rng_matrix(seed + 3, k, psd=True) + np.eye(k)
    V = rng.uniform(-1.0, 1.0, size=(k, n))
    M = A + U @ C @ V
    if abs(np.linalg.det(M)) < 1e-8:
        return
    np.testing.assert_allclose(woodbury_inverse(A, U, C, V), np.linalg.inv(M), atol=1e-8)
