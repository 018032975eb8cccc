"""Dense linear-algebra kernels: adjugates, principal submatrices, and the
subset expansions of det(A + Lambda) and (A + Lambda)^-1 for diagonal Lambda.

These are verification primitives, not production solve paths: the subset
expansions enumerate 2^n terms and are capped at n <= 12.
"""

import itertools

import numpy as np

SUBSET_LIMIT = 12


class CombinatorialLimitError(ValueError):
    """Raised when a 2^n subset enumeration would exceed SUBSET_LIMIT."""


def _check_square(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def _check_sigma(M, sigma):
    sigma = np.asarray(sigma).astype(bool)
    if sigma.ndim != 1 or sigma.size != M.shape[0]:
        raise ValueError(
            f"active-set length {sigma.size} does not match matrix dimension {M.shape[0]}"
        )
    return sigma


def subsets(n):
    """Yield all boolean masks of length n (2^n of them), lowest index fastest."""
    if n > SUBSET_LIMIT:
        raise CombinatorialLimitError(
            f"subset enumeration needs 2^{n} terms; limit is n <= {SUBSET_LIMIT}"
        )
    for bits in itertools.product((False, True), repeat=n):
        yield np.array(bits[::-1], dtype=bool)


def det(M):
    """Determinant with the empty-matrix convention det([]) = 1."""
    M = _check_square(M)
    if M.shape[0] == 0:
        return 1.0
    return float(np.linalg.det(M))


def adjugate(M):
    """Adjugate (transpose of the cofactor matrix) by cofactor expansion.

    Satisfies adj(M) @ M = M @ adj(M) = det(M) * I, including for singular M.
    The 1x1 adjugate is [[1]] and the 0x0 adjugate is the 0x0 matrix, so the
    subset expansions below hold without special cases.
    """
    M = _check_square(M)
    n = M.shape[0]
    if n > SUBSET_LIMIT:
        raise CombinatorialLimitError(f"cofactor expansion capped at n <= {SUBSET_LIMIT}")
    if n == 0:
        return np.zeros((0, 0))
    if n == 1:
        return np.ones((1, 1))
    cof = np.empty((n, n))
    idx = np.arange(n)
    for i in range(n):
        rows = idx[idx != i]
        for j in range(n):
            cols = idx[idx != j]
            minor = M[np.ix_(rows, cols)]
            cof[i, j] = (-1.0) ** (i + j) * np.linalg.det(minor)
    return cof.T


def principal_submatrix(M, sigma):
    """Rows and columns i of M with sigma_i = 1, in ascending index order."""
    M = _check_square(M)
    sigma = _check_sigma(M, sigma)
    keep = np.flatnonzero(sigma)
    return M[np.ix_(keep, keep)]


def padded_inverse(M, sigma):
    """Inverse of the sigma-principal submatrix, zero-padded back to M's size."""
    M = _check_square(M)
    sigma = _check_sigma(M, sigma)
    keep = np.flatnonzero(sigma)
    out = np.zeros_like(M)
    if keep.size == 0:
        return out
    sub = M[np.ix_(keep, keep)]
    out[np.ix_(keep, keep)] = np.linalg.inv(sub)
    return out


def padded_adjugate(M, sigma):
    """Adjugate of the sigma-principal submatrix, zero-padded back to M's size."""
    M = _check_square(M)
    sigma = _check_sigma(M, sigma)
    keep = np.flatnonzero(sigma)
    out = np.zeros_like(M)
    if keep.size == 0:
        return out
    out[np.ix_(keep, keep)] = adjugate(M[np.ix_(keep, keep)])
    return out


def det_plus_diagonal(A, lam):
    """det(A + Diag(lam)) via the principal-minor subset expansion.

    Returns sum over sigma in {0,1}^n of det(A_sigma) * prod_i lam_i^(1-sigma_i).
    The sigma = 0 term contributes prod(lam) through the det([]) = 1 convention.
    """
    A = _check_square(A)
    lam = np.asarray(lam, dtype=float)
    n = A.shape[0]
    if lam.shape != (n,):
        raise ValueError(f"lam has shape {lam.shape}, expected ({n},)")
    total = 0.0
    for sigma in subsets(n):
        total += det(principal_submatrix(A, sigma)) * float(np.prod(lam[~sigma]))
    return total


def _is_psd(A, tol_scale=1e-10):
    if A.shape[0] == 0:
        return True
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    return w.min() >= -tol_scale * max(1.0, np.linalg.norm(A, 2))


def decompose_inverse_plus_diagonal(A, lam):
    """Expand (A + Diag(lam))^-1 into padded inverses and adjugates over subsets.

    For PSD A and lam > 0, returns ``(terms, h)`` where ``h = det(A + Diag(lam))``
    and ``terms`` is a list of ``(sigma, weight, matrix)`` with

    * invertible A_sigma: weight = det(A_sigma) * prod(lam[~sigma]) / h and the
      matrix is the padded inverse of A_sigma,
    * singular A_sigma: weight = prod(lam[~sigma]) / h and the matrix is the
      padded adjugate of A_sigma.

    The weighted sum of the matrices reconstructs (A + Diag(lam))^-1.
    """
    A = _check_square(A)
    lam = np.asarray(lam, dtype=float)
    n = A.shape[0]
    if lam.shape != (n,):
        raise ValueError(f"lam has shape {lam.shape}, expected ({n},)")
    if np.any(lam <= 0):
        raise ValueError("lam must be positive entrywise")
    if not _is_psd(A):
        raise ValueError("A must be positive semidefinite")

    terms = []
    h = 0.0
    for sigma in subsets(n):
        sub = principal_submatrix(A, sigma)
        d = det(sub)
        c = float(np.prod(lam[~sigma]))
        h += d * c
        # Relative tolerance on det: Hadamard bound sets the natural scale.
        row_norms = np.linalg.norm(sub, axis=1) if sub.size else np.array([])
        scale = float(np.prod(row_norms)) if row_norms.size else 1.0
        if abs(d) > 1e-12 * max(1.0, scale):
            terms.append((sigma, d * c, padded_inverse(A, sigma)))
        else:
            terms.append((sigma, c, padded_adjugate(A, sigma)))
    if h <= 0:
        raise ValueError("det(A + Diag(lam)) must be positive for PSD A, lam > 0")
    terms = [(sigma, weight / h, mat) for sigma, weight, mat in terms]
    return terms, h


def reconstruct_inverse(terms):
    """Sum of weight * matrix over the terms of decompose_inverse_plus_diagonal."""
    if not terms:
        raise ValueError("no terms to reconstruct from")
    out = np.zeros_like(terms[0][2])
    for _, weight, mat in terms:
        out += weight * mat
    return out


def woodbury_inverse(A, U, C, V):
    """(A + U C V)^-1 through the low-rank update identity.

    Requires invertible A and C; raises numpy.linalg.LinAlgError when A, C, or
    the capacitance matrix C^-1 + V A^-1 U is singular.
    """
    A = _check_square(A)
    C = _check_square(C)
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    n, k = A.shape[0], C.shape[0]
    if U.shape != (n, k) or V.shape != (k, n):
        raise ValueError(
            f"shapes not conformable: A {A.shape}, U {U.shape}, C {C.shape}, V {V.shape}"
        )
    A_inv = np.linalg.inv(A)
    if k == 0:
        return A_inv
    capacitance = np.linalg.inv(C) + V @ A_inv @ U
    inner = np.linalg.solve(capacitance, V @ A_inv)
    return A_inv - A_inv @ U @ inner
