"""Dense symmetric eigen-solvers and Cholesky factorisation.

Everything here works on small-to-medium dense matrices (p up to a few
hundred).  The kernels are JIT-compiled with numba so that a full
300 x 300 decomposition costs tens of milliseconds; all of them are
deterministic for a given input.

The symmetric eigen-solver is Householder tridiagonalisation followed by
the implicit QL algorithm with Wilkinson-style shifts (the EISPACK
``tred2``/``tql2`` pair).
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import InvalidInput, NotPositiveDefinite, NumericalFailure

__all__ = [
    "EigenDecomposition",
    "as_sym_matrix",
    "sym_eig",
    "cholesky",
    "solve_lower",
    "solve_upper_transposed",
    "generalized_sym_eig",
]

MAX_QL_ITERATIONS = 100
SYMMETRY_RTOL = 1e-10
# Pivots at or below CHOLESKY_RTOL * max(diag) are treated as non-positive;
# a rank-deficient scatter matrix otherwise leaks through as round-off noise.
CHOLESKY_RTOL = 1e-12


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending, eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_sym_matrix(A, name: str = "A") -> np.ndarray:
    """Validate ``A`` as a finite symmetric matrix and return it as float64."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput(f"{name} must be a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        raise InvalidInput(f"{name} must have positive dimension")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} contains non-finite entries")
    asym = np.abs(A - A.T)
    if np.any(asym > SYMMETRY_RTOL * np.maximum(1.0, np.abs(A))):
        raise InvalidInput(f"{name} is not symmetric (max asymmetry {asym.max():.3e})")
    return A


@njit(cache=True, nogil=True)
def _tred2(V, d, e):
    # Householder reduction to tridiagonal form; V holds the input on entry
    # and the accumulated orthogonal transform on exit.
    n = V.shape[0]
    for j in range(n):
        d[j] = V[n - 1, j]
    for i in range(n - 1, 0, -1):
        scale = 0.0
        h = 0.0
        for k in range(i):
            scale += abs(d[k])
        if scale == 0.0:
            e[i] = d[i - 1]
            for j in range(i):
                d[j] = V[i - 1, j]
                V[i, j] = 0.0
                V[j, i] = 0.0
        else:
            for k in range(i):
                d[k] /= scale
                h += d[k] * d[k]
            f = d[i - 1]
            g = math.sqrt(h)
            if f > 0:
                g = -g
            e[i] = scale * g
            h = h - f * g
            d[i - 1] = f - g
            for j in range(i):
                e[j] = 0.0
            for j in range(i):
                f = d[j]
                V[j, i] = f
                g = e[j] + V[j, j] * f
                for k in range(j + 1, i):
                    g += V[k, j] * d[k]
                    e[k] += V[k, j] * f
                e[j] = g
            f = 0.0
            for j in range(i):
                e[j] /= h
                f += e[j] * d[j]
            hh = f / (h + h)
            for j in range(i):
                e[j] -= hh * d[j]
            for j in range(i):
                f = d[j]
                g = e[j]
                for k in range(j, i):
                    V[k, j] -= f * e[k] + g * d[k]
                d[j] = V[i - 1, j]
                V[i, j] = 0.0
        d[i] = h

    for i in range(n - 1):
        V[n - 1, i] = V[i, i]
        V[i, i] = 1.0
        h = d[i + 1]
        if h != 0.0:
            for k in range(i + 1):
                d[k] = V[k, i + 1] / h
            for j in range(i + 1):
                g = 0.0
                for k in range(i + 1):
                    g += V[k, i + 1] * V[k, j]
                for k in range(i + 1):
                    V[k, j] -= g * d[k]
        for k in range(i + 1):
            V[k, i + 1] = 0.0
    for j in range(n):
        d[j] = V[n - 1, j]
        V[n - 1, j] = 0.0
    V[n - 1, n - 1] = 1.0
    e[0] = 0.0


@njit(cache=True, nogil=True)
def _tql2(V, d, e, max_iter):
    # Implicit QL on the tridiagonal (d, e); returns the worst per-eigenvalue
    # iteration count, or -1 if some eigenvalue exceeded max_iter.
    n = V.shape[0]
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    f = 0.0
    tst1 = 0.0
    eps = 2.0 ** -52
    worst = 0
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n - 1:
            if abs(e[m]) <= eps * tst1:
                break
            m += 1
        if m > l:
            it = 0
            while True:
                it += 1
                if it > max_iter:
                    return -1
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = math.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h

                p = d[m]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = math.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    for k in range(n):
                        h = V[k, i + 1]
                        V[k, i + 1] = s * V[k, i] + c * h
                        V[k, i] = c * V[k, i] - s * h
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if not abs(e[l]) > eps * tst1:
                    break
            if it > worst:
                worst = it
        d[l] = d[l] + f
        e[l] = 0.0
    return worst


def _sort_and_fix_signs(values: np.ndarray, vectors: np.ndarray) -> EigenDecomposition:
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    # largest-magnitude entry of each column made positive (first one on ties)
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[pivots, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    return EigenDecomposition(values, np.ascontiguousarray(vectors * signs))


def sym_eig(A) -> EigenDecomposition:
    """Full eigendecomposition of a real symmetric matrix.

    Eigenvalues come back in descending order; each eigenvector is scaled to
    unit length and signed so its largest-magnitude entry is positive.

    Raises
    ------
    InvalidInput
        If ``A`` is not a finite symmetric square matrix.
    NumericalFailure
        If the QL iteration fails to converge for some eigenvalue.
    """
    A = as_sym_matrix(A)
    n = A.shape[0]
    # power-of-two rescaling is exact and keeps tiny or huge entries away
    # from under/overflow inside the Householder sums
    amax = float(np.max(np.abs(A)))
    exponent = np.frexp(amax)[1] if amax > 0.0 else 0
    V = np.ascontiguousarray(np.ldexp(A, -exponent))
    d = np.empty(n)
    e = np.empty(n)
    _tred2(V, d, e)
    status = _tql2(V, d, e, MAX_QL_ITERATIONS)
    if status < 0:
        raise NumericalFailure(
            f"QL iteration did not converge within {MAX_QL_ITERATIONS} iterations",
            iterations=MAX_QL_ITERATIONS,
        )
    return _sort_and_fix_signs(np.ldexp(d, exponent), V)


@njit(cache=True, nogil=True)
def _cholesky_kernel(A, tol):
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > tol:
            return L, j
        ljj = math.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, n):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / ljj
    return L, -1


def cholesky(A, rtol: float = CHOLESKY_RTOL) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == A``.

    A pivot no larger than ``rtol * max(diag(A))`` counts as non-positive, so
    numerically singular matrices are rejected instead of yielding a factor
    with round-off sized diagonal entries.
    """
    A = as_sym_matrix(A)
    tol = rtol * max(float(np.max(np.diag(A))), 0.0)
    L, failed = _cholesky_kernel(np.ascontiguousarray(A), tol)
    if failed >= 0:
        raise NotPositiveDefinite(
            f"matrix is not positive definite (pivot {failed} is non-positive)",
            pivot=int(failed),
        )
    return L


@njit(cache=True, nogil=True)
def _forward_kernel(L, B):
    n, m = B.shape
    X = B.copy()
    for i in range(n):
        for c in range(m):
            t = X[i, c]
            for k in range(i):
                t -= L[i, k] * X[k, c]
            X[i, c] = t / L[i, i]
    return X


@njit(cache=True, nogil=True)
def _backward_transposed_kernel(L, B):
    # solves L.T @ X = B without forming L.T
    n, m = B.shape
    X = B.copy()
    for i in range(n - 1, -1, -1):
        for c in range(m):
            t = X[i, c]
            for k in range(i + 1, n):
                t -= L[k, i] * X[k, c]
            X[i, c] = t / L[i, i]
    return X


def solve_lower(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``L @ X = B`` for lower-triangular ``L``."""
    B = np.asarray(B, dtype=np.float64)
    out = _forward_kernel(np.ascontiguousarray(L), np.ascontiguousarray(B.reshape(B.shape[0], -1)))
    return out.reshape(B.shape)


def solve_upper_transposed(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``L.T @ X = B`` for lower-triangular ``L``."""
    B = np.asarray(B, dtype=np.float64)
    out = _backward_transposed_kernel(
        np.ascontiguousarray(L), np.ascontiguousarray(B.reshape(B.shape[0], -1))
    )
    return out.reshape(B.shape)


def generalized_sym_eig(A, B) -> EigenDecomposition:
    """Solve ``A w = lambda B w`` for symmetric ``A`` and SPD ``B``.

    ``B`` is factored as ``L L^T``; the standard problem for
    ``L^-1 A L^-T`` is solved and its eigenvectors mapped back through
    ``L^-T``.  The returned vectors are B-orthonormal, sorted by descending
    eigenvalue, and sign-normalised like :func:`sym_eig`.

    Raises
    ------
    NotPositiveDefinite
        If ``B`` fails the Cholesky factorisation.
    """
    A = as_sym_matrix(A, "A")
    B = as_sym_matrix(B, "B")
    if A.shape != B.shape:
        raise InvalidInput(f"A and B differ in shape: {A.shape} vs {B.shape}")
    L = cholesky(B)
    Y = solve_lower(L, A)
    C = solve_lower(L, np.ascontiguousarray(Y.T))
    C = 0.5 * (C + C.T)
    values, vectors = sym_eig(C)
    W = solve_upper_transposed(L, vectors)
    return _sort_and_fix_signs(values, W)
