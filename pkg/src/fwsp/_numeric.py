"""Small compiled numeric primitives shared by the interpreted code paths
and the experiment kernels.

Keeping these in one place makes the two paths bit-identical where it
matters (posterior draws, best-arm tests, rank-one updates), so the kernel
parity tests can assert exact equality of pull sequences.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_SQRT2 = math.sqrt(2.0)


@njit(cache=True)
def chol_lower(M):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Returns ``(L, ok)``; ``ok`` is False when a pivot is not positive.
    """
    d = M.shape[0]
    L = np.zeros((d, d))
    for j in range(d):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return L, False
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, d):
            t = M[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return L, True


@njit(cache=True)
def mat_vec(M, v):
    d = M.shape[0]
    out = np.zeros(d)
    for i in range(d):
        s = 0.0
        for j in range(M.shape[1]):
            s += M[i, j] * v[j]
        out[i] = s
    return out


@njit(cache=True)
def gaussian_draw(mean, L, z):
    """``mean + L @ z`` with a fixed accumulation order."""
    d = mean.shape[0]
    out = np.empty(d)
    for i in range(d):
        s = mean[i]
        for j in range(i + 1):
            s += L[i, j] * z[j]
        out[i] = s
    return out


@njit(cache=True)
def sm_update(cov, v):
    """In-place Sherman-Morrison downdate of ``cov`` for ``prec += v v'``."""
    d = cov.shape[0]
    u = np.zeros(d)
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += cov[i, j] * v[j]
        u[i] = s
    denom = 1.0
    for i in range(d):
        denom += v[i] * u[i]
    for i in range(d):
        for j in range(d):
            cov[i, j] -= u[i] * u[j] / denom


@njit(cache=True)
def argmax_dot(A, theta):
    """First index maximizing ``A @ theta`` and the number of exact ties."""
    K = A.shape[0]
    best = -np.inf
    imax = 0
    ties = 0
    for i in range(K):
        s = 0.0
        for j in range(A.shape[1]):
            s += A[i, j] * theta[j]
        if s > best:
            best = s
            imax = i
            ties = 1
        elif s == best:
            ties += 1
    return imax, ties


@njit(cache=True)
def first_beating_arm(A, theta_t, ihat):
    """Smallest arm whose mean under ``theta_t`` beats arm ``ihat`` (or -1)."""
    K, d = A.shape
    base = 0.0
    for j in range(d):
        base += A[ihat, j] * theta_t[j]
    for x in range(K):
        if x == ihat:
            continue
        s = 0.0
        for j in range(d):
            s += A[x, j] * theta_t[j]
        if s > base:
            return x
    return -1


@njit(cache=True)
def alt_accept_bound(A, mean, L, ihat):
    """Union bound on the probability that one posterior draw beats ``ihat``.

    Sums ``Phi(m_x / s_x)`` over the scenarios, where ``m_x`` and ``s_x``
    are the mean and standard deviation of ``(a_x - a_ihat)' theta`` under
    ``N(mean, L L')``.  A degenerate direction counts as certain acceptance.
    """
    K, d = A.shape
    q = 0.0
    for x in range(K):
        if x == ihat:
            continue
        m = 0.0
        for j in range(d):
            m += (A[x, j] - A[ihat, j]) * mean[j]
        s2 = 0.0
        for j in range(d):
            t = 0.0
            for i in range(d):
                t += L[i, j] * (A[x, i] - A[ihat, i])
            s2 += t * t
        if s2 <= 0.0:
            q += 1.0
        else:
            q += 0.5 * math.erfc(-(m / math.sqrt(s2)) / _SQRT2)
    return q
