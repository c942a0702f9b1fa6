"""Compiled inner loops for the long experiment runs.

These kernels mirror the interpreted implementations in `dynamics` and
`learning` step for step (the parity tests assert identical pull sequences);
they exist because the acceptance-scale runs take millions of iterations.
The allocation-side information matrix is maintained by rank-one updates,
with a full eigendecomposition refresh whenever a new arm joins the active
set and at every record step, which bounds drift between refreshes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import model
from .divergences import SPAN_EIG_CUTOFF, SPAN_RESIDUAL_TOL
from ._numeric import (
    alt_accept_bound,
    argmax_dot,
    chol_lower,
    first_beating_arm,
    gaussian_draw,
    mat_vec,
    sm_update,
)
from .learning import REJECTION_SKIP_TOL, TIE_PERTURBATION, TIE_REDRAWS
from .rng import fill_normals

_CLARKE_EPS = 1e-6

_GAUSSIAN, _BERNOULLI, _POISSON = 0, 1, 2
_FAMILY_CODES = {model.GAUSSIAN: _GAUSSIAN, model.BERNOULLI: _BERNOULLI, model.POISSON: _POISSON}


# ---------------------------------------------------------------------------
# shared jitted helpers
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pinv_flags(W, Delta, Winv, flags):
    """Pseudoinverse of PSD ``W`` plus in-span flags for each row of Delta."""
    d = W.shape[0]
    w, Q = np.linalg.eigh(W)
    wmax = w[d - 1]
    if wmax < 0.0:
        wmax = 0.0
    for r in range(d):
        for c in range(d):
            s = 0.0
            for j in range(d):
                if wmax > 0.0 and w[j] > SPAN_EIG_CUTOFF * wmax:
                    s += Q[r, j] * Q[c, j] / w[j]
            Winv[r, c] = s
    y = np.zeros(d)
    for xp in range(Delta.shape[0]):
        # residual of delta against the range of W: delta - W (Winv delta)
        for r in range(d):
            s = 0.0
            for c in range(d):
                s += Winv[r, c] * Delta[xp, c]
            y[r] = s
        rn = 0.0
        dn = 0.0
        for r in range(d):
            s = Delta[xp, r]
            for c in range(d):
                s -= W[r, c] * y[c]
            rn += s * s
            dn += Delta[xp, r] * Delta[xp, r]
        flags[xp] = math.sqrt(rn) <= SPAN_RESIDUAL_TOL * math.sqrt(dn)


@njit(cache=True)
def _lin_D_values(Minv, Delta, gap2, flags, scale, D):
    """D per scenario from a (scaled) inverse: gap^2 / (2 * scale * quad)."""
    for xp in range(Delta.shape[0]):
        if not flags[xp]:
            D[xp] = 0.0
            continue
        q = 0.0
        d = Delta.shape[1]
        for r in range(d):
            t = 0.0
            for c in range(d):
                t += Minv[r, c] * Delta[xp, c]
            q += Delta[xp, r] * t
        D[xp] = gap2[xp] / (2.0 * scale * q)


@njit(cache=True)
def _lin_grad_F(A, inv_s2, Minv, Delta, gap2, flags, mu, g):
    """Allocation gradient of F; scale-free in any positive multiple of Vp^+."""
    K, d = A.shape
    for i in range(K):
        g[i] = 0.0
    for xp in range(Delta.shape[0]):
        w = mu[xp]
        if w <= 0.0 or not flags[xp]:
            continue
        y = np.zeros(d)
        for r in range(d):
            s = 0.0
            for c in range(d):
                s += Minv[r, c] * Delta[xp, c]
            y[r] = s
        quad = 0.0
        for r in range(d):
            quad += Delta[xp, r] * y[r]
        for i in range(K):
            proj = 0.0
            for j in range(d):
                proj += A[i, j] * y[j]
            g[i] += w * inv_s2[i] * (gap2[xp] / 2.0) * proj * proj / (quad * quad)


@njit(cache=True)
def _kl_scalar(fam, a, b, s2a):
    if fam == _GAUSSIAN:
        return (a - b) * (a - b) / (2.0 * s2a)
    if a == b:
        return 0.0
    if fam == _BERNOULLI:
        out = 0.0
        if a > 0.0:
            out += a * math.log(a / b)
        if a < 1.0:
            out += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
        return out
    if a == 0.0:
        return b
    return a * math.log(a / b) - a + b


@njit(cache=True)
def _unstr_pooled(fam, thI, thx, pI, px, s2I, s2x):
    wI, wx = pI, px
    if fam == _GAUSSIAN:
        wI /= s2I
        wx /= s2x
    return (wI * thI + wx * thx) / (wI + wx)


# ---------------------------------------------------------------------------
# discrete self-play, linear instances
# ---------------------------------------------------------------------------


@njit(cache=True)
def _fwsp_linear_core(A, theta, inv_s2, scen_arms, istar, p0, mu0, n_iters,
                      rec_steps, rec_F, rec_V, rec_gap, rec_P, rec_Mu,
                      rec_arm, rec_scen, counts_p, counts_mu):
    K, d = A.shape
    nscen = scen_arms.shape[0]
    S = np.zeros((K, d, d))
    for i in range(K):
        for r in range(d):
            for c in range(d):
                S[i, r, c] = inv_s2[i] * A[i, r] * A[i, c]
    Delta = np.zeros((nscen, d))
    gap2 = np.zeros(nscen)
    for xp in range(nscen):
        x = scen_arms[xp]
        g = 0.0
        for j in range(d):
            Delta[xp, j] = A[istar, j] - A[x, j]
            g += Delta[xp, j] * theta[j]
        gap2[xp] = g * g

    U = np.zeros((d, d))
    Uinv = np.zeros((d, d))
    inspan = np.zeros(nscen, dtype=np.bool_)
    pulled = np.zeros(K, dtype=np.bool_)
    Wtmp = np.zeros((d, d))
    Winv = np.zeros((d, d))
    eflags = np.zeros(nscen, dtype=np.bool_)
    D = np.zeros(nscen)
    gF = np.zeros(K)
    p = np.zeros(K)
    mu = np.zeros(nscen)

    last_arm = -1
    last_scen = -1
    rec_ptr = 0
    n_rec = rec_steps.shape[0]

    for n in range(n_iters + 1):
        # state at counter n
        if n == 0:
            for i in range(K):
                p[i] = p0[i]
            for xp in range(nscen):
                mu[xp] = mu0[xp]
            for r in range(d):
                for c in range(d):
                    s = 0.0
                    for i in range(K):
                        s += p0[i] * S[i, r, c]
                    Wtmp[r, c] = s
            _pinv_flags(Wtmp, Delta, Uinv, inspan)
            scale = 1.0
        else:
            for i in range(K):
                p[i] = counts_p[i] / n
            for xp in range(nscen):
                mu[xp] = counts_mu[xp] / n
            scale = float(n)

        recording = rec_ptr < n_rec and rec_steps[rec_ptr] == n
        if recording and n > 0:
            # refresh the maintained inverse to cap rank-one drift
            _pinv_flags(U, Delta, Uinv, inspan)

        _lin_D_values(Uinv, Delta, gap2, inspan, scale, D)
        smooth = True
        for xp in range(nscen):
            if mu[xp] > 0.0 and not inspan[xp]:
                smooth = False
                break

        if smooth:
            _lin_grad_F(A, inv_s2, Uinv, Delta, gap2, inspan, mu, gF)
        else:
            # limiting-gradient evaluation at (1-eps) p + eps uniform
            for r in range(d):
                for c in range(d):
                    s = 0.0
                    for i in range(K):
                        s += ((1.0 - _CLARKE_EPS) * p[i] + _CLARKE_EPS / K) * S[i, r, c]
                    Wtmp[r, c] = s
            _pinv_flags(Wtmp, Delta, Winv, eflags)
            _lin_grad_F(A, inv_s2, Winv, Delta, gap2, eflags, mu, gF)

        if recording:
            F = 0.0
            dmin = D[0]
            for xp in range(nscen):
                F += mu[xp] * D[xp]
                if D[xp] < dmin:
                    dmin = D[xp]
            rec_F[rec_ptr] = F
            rec_gap[rec_ptr] = F - dmin
            if smooth:
                gmax = gF[0]
                pg = 0.0
                for i in range(K):
                    if gF[i] > gmax:
                        gmax = gF[i]
                    pg += p[i] * gF[i]
                rec_V[rec_ptr] = (gmax - pg) + (F - dmin)
            else:
                rec_V[rec_ptr] = np.nan
            for i in range(K):
                rec_P[rec_ptr, i] = p[i]
            for xp in range(nscen):
                rec_Mu[rec_ptr, xp] = mu[xp]
            rec_arm[rec_ptr] = last_arm
            rec_scen[rec_ptr] = last_scen
            rec_ptr += 1

        if n == n_iters:
            break

        i_n = 0
        for i in range(1, K):
            if gF[i] > gF[i_n]:
                i_n = i
        xp_n = 0
        for xp in range(1, nscen):
            if D[xp] < D[xp_n]:
                xp_n = xp

        counts_p[i_n] += 1
        counts_mu[xp_n] += 1
        if n == 0:
            for r in range(d):
                for c in range(d):
                    U[r, c] = S[i_n, r, c]
            pulled[i_n] = True
            _pinv_flags(U, Delta, Uinv, inspan)
        else:
            for r in range(d):
                for c in range(d):
                    U[r, c] += S[i_n, r, c]
            if pulled[i_n]:
                v = A[i_n] * math.sqrt(inv_s2[i_n])
                sm_update(Uinv, v)
            else:
                pulled[i_n] = True
                _pinv_flags(U, Delta, Uinv, inspan)
        last_arm = i_n
        last_scen = scen_arms[xp_n]


# ---------------------------------------------------------------------------
# discrete self-play, unstructured instances
# ---------------------------------------------------------------------------


@njit(cache=True)
def _fwsp_unstructured_core(theta, s2, fam, scen_arms, istar, p0, mu0, n_iters,
                            rec_steps, rec_F, rec_V, rec_gap, rec_P, rec_Mu,
                            rec_arm, rec_scen, counts_p, counts_mu):
    K = theta.shape[0]
    nscen = scen_arms.shape[0]
    D = np.zeros(nscen)
    gF = np.zeros(K)
    p = np.zeros(K)
    mu = np.zeros(nscen)

    last_arm = -1
    last_scen = -1
    rec_ptr = 0
    n_rec = rec_steps.shape[0]

    for n in range(n_iters + 1):
        if n == 0:
            for i in range(K):
                p[i] = p0[i]
            for xp in range(nscen):
                mu[xp] = mu0[xp]
        else:
            for i in range(K):
                p[i] = counts_p[i] / n
            for xp in range(nscen):
                mu[xp] = counts_mu[xp] / n

        smooth = True
        for xp in range(nscen):
            x = scen_arms[xp]
            pI, px = p[istar], p[x]
            if pI + px <= 0.0:
                D[xp] = 0.0
                if mu[xp] > 0.0:
                    smooth = False
            else:
                lam = _unstr_pooled(fam, theta[istar], theta[x], pI, px, s2[istar], s2[x])
                D[xp] = pI * _kl_scalar(fam, theta[istar], lam, s2[istar]) + px * _kl_scalar(
                    fam, theta[x], lam, s2[x]
                )

        for i in range(K):
            gF[i] = 0.0
        for xp in range(nscen):
            w = mu[xp]
            if w <= 0.0:
                continue
            x = scen_arms[xp]
            pI, px = p[istar], p[x]
            if pI + px <= 0.0:
                # limiting gradient at (1-eps) p + eps uniform: both involved
                # arms get mass eps/K, so the pooled mean is their midpoint
                pI = _CLARKE_EPS / K
                px = _CLARKE_EPS / K
            lam = _unstr_pooled(fam, theta[istar], theta[x], pI, px, s2[istar], s2[x])
            gF[istar] += w * _kl_scalar(fam, theta[istar], lam, s2[istar])
            gF[x] += w * _kl_scalar(fam, theta[x], lam, s2[x])

        if rec_ptr < n_rec and rec_steps[rec_ptr] == n:
            F = 0.0
            dmin = D[0]
            for xp in range(nscen):
                F += mu[xp] * D[xp]
                if D[xp] < dmin:
                    dmin = D[xp]
            rec_F[rec_ptr] = F
            rec_gap[rec_ptr] = F - dmin
            if smooth:
                gmax = gF[0]
                pg = 0.0
                for i in range(K):
                    if gF[i] > gmax:
                        gmax = gF[i]
                    pg += p[i] * gF[i]
                rec_V[rec_ptr] = (gmax - pg) + (F - dmin)
            else:
                rec_V[rec_ptr] = np.nan
            for i in range(K):
                rec_P[rec_ptr, i] = p[i]
            for xp in range(nscen):
                rec_Mu[rec_ptr, xp] = mu[xp]
            rec_arm[rec_ptr] = last_arm
            rec_scen[rec_ptr] = last_scen
            rec_ptr += 1

        if n == n_iters:
            break

        i_n = 0
        for i in range(1, K):
            if gF[i] > gF[i_n]:
                i_n = i
        xp_n = 0
        for xp in range(1, nscen):
            if D[xp] < D[xp_n]:
                xp_n = xp
        counts_p[i_n] += 1
        counts_mu[xp_n] += 1
        last_arm = i_n
        last_scen = scen_arms[xp_n]


# ---------------------------------------------------------------------------
# posterior-sampling learning loop
# ---------------------------------------------------------------------------


@njit(cache=True)
def _learning_core(A, theta_true, s2, seed, T, ridge, max_attempts,
                   rec_steps, rec_counts_p, rec_counts_mu, rec_arm, rec_scen,
                   rec_fb, log_arm, log_scen, log_fb, do_log):
    K, d = A.shape
    inv_s2 = 1.0 / s2
    m_true = np.zeros(K)
    for i in range(K):
        s = 0.0
        for j in range(d):
            s += A[i, j] * theta_true[j]
        m_true[i] = s
    S = np.zeros((K, d, d))
    for i in range(K):
        for r in range(d):
            for c in range(d):
                S[i, r, c] = inv_s2[i] * A[i, r] * A[i, c]

    cov = np.zeros((d, d))
    for j in range(d):
        cov[j, j] = 1.0 / ridge
    b = np.zeros(d)

    counter = np.uint64(0)
    z1 = np.empty(1)
    zd = np.empty(d)

    # warm-up: each arm once in index order (posterior only; the allocation
    # state starts fresh from the uniform pair)
    for j in range(K):
        counter = fill_normals(seed, counter, z1)
        y = m_true[j] + math.sqrt(s2[j]) * z1[0]
        sm_update(cov, A[j] * math.sqrt(inv_s2[j]))
        for r in range(d):
            b[r] += inv_s2[j] * y * A[j, r]

    counts_p = np.zeros(K, dtype=np.int64)
    counts_mu = np.zeros(K, dtype=np.int64)
    U = np.zeros((d, d))
    Uinv = np.zeros((d, d))
    pulled = np.zeros(K, dtype=np.bool_)
    Wtmp = np.zeros((d, d))
    Winv = np.zeros((d, d))
    delta = np.zeros(d)
    y_buf = np.zeros(d)
    gF = np.zeros(K)
    m_hat = np.zeros(K)

    rec_ptr = 0
    n_rec = rec_steps.shape[0]

    for t in range(T):
        mean = mat_vec(cov, b)
        L, ok = chol_lower(cov)
        if not ok:
            # ridge > 0 keeps cov positive definite; bail out defensively
            return -1
        counter = fill_normals(seed, counter, zd)
        th = gaussian_draw(mean, L, zd)
        ih, ties = argmax_dot(A, th)
        redraws = 0
        while ties > 1 and redraws < TIE_REDRAWS:
            counter = fill_normals(seed, counter, zd)
            th = gaussian_draw(mean, L, zd)
            ih, ties = argmax_dot(A, th)
            redraws += 1
        if ties > 1:
            th[0] += TIE_PERTURBATION
            ih, ties = argmax_dot(A, th)
        for i in range(K):
            s = 0.0
            for j in range(d):
                s += A[i, j] * th[j]
            m_hat[i] = s

        x_t = -1
        fb = False
        q_ub = alt_accept_bound(A, mean, L, ih)
        if max_attempts * q_ub >= REJECTION_SKIP_TOL:
            for _ in range(max_attempts):
                counter = fill_normals(seed, counter, zd)
                cand = gaussian_draw(mean, L, zd)
                x = first_beating_arm(A, cand, ih)
                if x >= 0:
                    x_t = x
                    break
        if x_t < 0:
            fb = True
            # informational argmin over the sampled parameter's scenarios
            best = np.inf
            x_t = 0 if ih != 0 else 1
            for x in range(K):
                if x == ih:
                    continue
                val = _lin_D_single(A, S, counts_p, t, U, Uinv, K, d, ih, x,
                                    m_hat, delta, y_buf)
                if val < best:
                    best = val
                    x_t = x
        counts_mu[x_t] += 1

        # arm selection at (p_t, mu_{t+1}) under th
        smooth = True
        for x in range(K):
            if x == ih or counts_mu[x] == 0:
                continue
            if not _inspan_now(A, S, counts_p, t, U, Uinv, K, d, ih, x, delta, y_buf):
                smooth = False
                break
        if smooth:
            _learn_grad(A, inv_s2, S, counts_p, t, U, Uinv, counts_mu, float(t + 1),
                        K, d, ih, m_hat, delta, y_buf, gF, False, Wtmp, Winv)
        else:
            _learn_grad(A, inv_s2, S, counts_p, t, U, Uinv, counts_mu, float(t + 1),
                        K, d, ih, m_hat, delta, y_buf, gF, True, Wtmp, Winv)
        i_t = 0
        for i in range(1, K):
            if gF[i] > gF[i_t]:
                i_t = i

        counts_p[i_t] += 1
        if counts_p[i_t] == 1 and t == 0:
            for r in range(d):
                for c in range(d):
                    U[r, c] = S[i_t, r, c]
            pulled[i_t] = True
            _refresh_uinv(U, Uinv, d)
        else:
            for r in range(d):
                for c in range(d):
                    U[r, c] += S[i_t, r, c]
            if pulled[i_t]:
                sm_update(Uinv, A[i_t] * math.sqrt(inv_s2[i_t]))
            else:
                pulled[i_t] = True
                _refresh_uinv(U, Uinv, d)

        counter = fill_normals(seed, counter, z1)
        yr = m_true[i_t] + math.sqrt(s2[i_t]) * z1[0]
        sm_update(cov, A[i_t] * math.sqrt(inv_s2[i_t]))
        for r in range(d):
            b[r] += inv_s2[i_t] * yr * A[i_t, r]

        if do_log:
            log_arm[t] = i_t
            log_scen[t] = x_t
            log_fb[t] = 1 if fb else 0

        if rec_ptr < n_rec and rec_steps[rec_ptr] == t + 1:
            for i in range(K):
                rec_counts_p[rec_ptr, i] = counts_p[i]
                rec_counts_mu[rec_ptr, i] = counts_mu[i]
            rec_arm[rec_ptr] = i_t
            rec_scen[rec_ptr] = x_t
            rec_fb[rec_ptr] = 1 if fb else 0
            rec_ptr += 1
            _refresh_uinv(U, Uinv, d)
    return 0


@njit(cache=True)
def _refresh_uinv(U, Uinv, d):
    w, Q = np.linalg.eigh(U)
    wmax = U[0, 0] * 0.0
    for j in range(d):
        if w[j] > wmax:
            wmax = w[j]
    for r in range(d):
        for c in range(d):
            s = 0.0
            for j in range(d):
                if wmax > 0.0 and w[j] > SPAN_EIG_CUTOFF * wmax:
                    s += Q[r, j] * Q[c, j] / w[j]
            Uinv[r, c] = s


@njit(cache=True)
def _alloc_matrix_uniform(A, S, K, d, W):
    for r in range(d):
        for c in range(d):
            s = 0.0
            for i in range(K):
                s += S[i, r, c] / K
            W[r, c] = s


@njit(cache=True)
def _inspan_now(A, S, counts_p, t, U, Uinv, K, d, ih, x, delta, y_buf):
    """In-span test for the scenario direction at the current allocation.

    At t = 0 the allocation is the uniform start (full row space when the
    features span it); afterwards it is the integer-count matrix ``U``.
    """
    for j in range(d):
        delta[j] = A[ih, j] - A[x, j]
    if t == 0:
        W = np.zeros((d, d))
        Winv = np.zeros((d, d))
        _alloc_matrix_uniform(A, S, K, d, W)
        _refresh_uinv(W, Winv, d)
        return _resid_ok(W, Winv, delta, y_buf, d)
    return _resid_ok(U, Uinv, delta, y_buf, d)


@njit(cache=True)
def _resid_ok(W, Winv, delta, y_buf, d):
    for r in range(d):
        s = 0.0
        for c in range(d):
            s += Winv[r, c] * delta[c]
        y_buf[r] = s
    rn = 0.0
    dn = 0.0
    for r in range(d):
        s = delta[r]
        for c in range(d):
            s -= W[r, c] * y_buf[c]
        rn += s * s
        dn += delta[r] * delta[r]
    return math.sqrt(rn) <= SPAN_RESIDUAL_TOL * math.sqrt(dn)


@njit(cache=True)
def _lin_D_single(A, S, counts_p, t, U, Uinv, K, d, ih, x, m_hat, delta, y_buf):
    """D(p_t, x) under the sampled parameter; 0 when out of span."""
    for j in range(d):
        delta[j] = A[ih, j] - A[x, j]
    if t == 0:
        W = np.zeros((d, d))
        Winv = np.zeros((d, d))
        _alloc_matrix_uniform(A, S, K, d, W)
        _refresh_uinv(W, Winv, d)
        if not _resid_ok(W, Winv, delta, y_buf, d):
            return 0.0
        quad = 0.0
        for r in range(d):
            s = 0.0
            for c in range(d):
                s += Winv[r, c] * delta[c]
            quad += delta[r] * s
        gap = m_hat[ih] - m_hat[x]
        return gap * gap / (2.0 * quad)
    if not _resid_ok(U, Uinv, delta, y_buf, d):
        return 0.0
    quad = 0.0
    for r in range(d):
        s = 0.0
        for c in range(d):
            s += Uinv[r, c] * delta[c]
        quad += delta[r] * s
    gap = m_hat[ih] - m_hat[x]
    return gap * gap / (2.0 * float(t) * quad)


@njit(cache=True)
def _learn_grad(A, inv_s2, S, counts_p, t, U, Uinv, counts_mu, mu_total,
                K, d, ih, m_hat, delta, y_buf, gF, regularize, Wtmp, Winv):
    """Gradient of F(p_t, mu_{t+1}; theta_hat); scale-free in the inverse.

    ``regularize`` switches to the limiting-gradient evaluation at
    ``(1-eps) p + eps uniform``, used while massed scenarios sit outside the
    active span.
    """
    for i in range(K):
        gF[i] = 0.0
    if regularize:
        for r in range(d):
            for c in range(d):
                s = 0.0
                for i in range(K):
                    pi = counts_p[i] / t if t > 0 else 1.0 / K
                    s += ((1.0 - _CLARKE_EPS) * pi + _CLARKE_EPS / K) * S[i, r, c]
                Wtmp[r, c] = s
        _refresh_uinv(Wtmp, Winv, d)
        M = Winv
    elif t == 0:
        _alloc_matrix_uniform(A, S, K, d, Wtmp)
        _refresh_uinv(Wtmp, Winv, d)
        M = Winv
    else:
        M = Uinv
    for x in range(K):
        if x == ih or counts_mu[x] == 0:
            continue
        w = counts_mu[x] / mu_total
        for j in range(d):
            delta[j] = A[ih, j] - A[x, j]
        for r in range(d):
            s = 0.0
            for c in range(d):
                s += M[r, c] * delta[c]
            y_buf[r] = s
        quad = 0.0
        for r in range(d):
            quad += delta[r] * y_buf[r]
        if quad <= 0.0:
            continue
        gap = m_hat[ih] - m_hat[x]
        for i in range(K):
            proj = 0.0
            for j in range(d):
                proj += A[i, j] * y_buf[j]
            gF[i] += w * inv_s2[i] * (gap * gap / 2.0) * proj * proj / (quad * quad)


# ---------------------------------------------------------------------------
# python-facing wrappers
# ---------------------------------------------------------------------------


def run_fwsp_kernel(inst, p0, mu0, n_iters, steps):
    from .dynamics import TrajectoryRecord

    scen = np.array(model.scenario_set(inst), dtype=np.int64)
    istar = model.best_arm(inst)
    n_rec = len(steps)
    K = inst.n_arms
    rec_steps = np.array(steps, dtype=np.int64)
    rec_F = np.zeros(n_rec)
    rec_V = np.zeros(n_rec)
    rec_gap = np.zeros(n_rec)
    rec_P = np.zeros((n_rec, K))
    rec_Mu = np.zeros((n_rec, K - 1))
    rec_arm = np.full(n_rec, -1, dtype=np.int64)
    rec_scen = np.full(n_rec, -1, dtype=np.int64)
    counts_p = np.zeros(K, dtype=np.int64)
    counts_mu = np.zeros(K - 1, dtype=np.int64)

    if inst.kind == model.LINEAR:
        _fwsp_linear_core(
            inst.features, inst.theta, 1.0 / inst.sigma2, scen, istar,
            np.asarray(p0, dtype=float), np.asarray(mu0, dtype=float),
            n_iters, rec_steps, rec_F, rec_V, rec_gap, rec_P, rec_Mu,
            rec_arm, rec_scen, counts_p, counts_mu,
        )
    else:
        fam = _FAMILY_CODES[inst.family]
        _fwsp_unstructured_core(
            inst.theta, inst.sigma2, fam, scen, istar,
            np.asarray(p0, dtype=float), np.asarray(mu0, dtype=float),
            n_iters, rec_steps, rec_F, rec_V, rec_gap, rec_P, rec_Mu,
            rec_arm, rec_scen, counts_p, counts_mu,
        )

    return [
        TrajectoryRecord(
            step=int(rec_steps[r]), F=float(rec_F[r]), V=float(rec_V[r]),
            gap_lb=float(rec_gap[r]), p=rec_P[r].copy(), mu=rec_Mu[r].copy(),
            pulled_arm=int(rec_arm[r]), chosen_scenario=int(rec_scen[r]),
        )
        for r in range(n_rec)
    ]


def run_learning_kernel(inst, T, seed, steps, ridge, max_attempts, with_actions):
    from .learning import _learning_record

    K, d = inst.n_arms, inst.dim
    main_steps = [s for s in steps if s >= 1]
    n_rec = len(main_steps)
    rec_steps = np.array(main_steps, dtype=np.int64)
    rec_counts_p = np.zeros((n_rec, K), dtype=np.int64)
    rec_counts_mu = np.zeros((n_rec, K), dtype=np.int64)
    rec_arm = np.full(n_rec, -1, dtype=np.int64)
    rec_scen = np.full(n_rec, -1, dtype=np.int64)
    rec_fb = np.zeros(n_rec, dtype=np.int64)
    size = T if with_actions else 1
    log_arm = np.zeros(size, dtype=np.int64)
    log_scen = np.zeros(size, dtype=np.int64)
    log_fb = np.zeros(size, dtype=np.int64)

    status = _learning_core(
        inst.features, inst.theta, inst.sigma2, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF),
        T, ridge, max_attempts, rec_steps, rec_counts_p, rec_counts_mu,
        rec_arm, rec_scen, rec_fb, log_arm, log_scen, log_fb, with_actions,
    )
    if status != 0:
        from .errors import CholeskyFailure

        raise CholeskyFailure("posterior covariance lost positive definiteness")

    records = []
    uniform_p = np.full(K, 1.0 / K)
    uniform_mu_arm = np.full(K, 1.0 / K)
    warm_counts = np.zeros(K, dtype=np.int64)
    for j in range(K):
        warm_counts[j] += 1
        records.append(
            _learning_record(inst, -K + j, uniform_p, uniform_mu_arm, pulled=j,
                             scenario=-1, fallback=False, counts_all=warm_counts)
        )
    for r in range(n_rec):
        m = int(rec_steps[r])
        p = rec_counts_p[r] / m
        mu_arm = rec_counts_mu[r] / m
        records.append(
            _learning_record(inst, m, p, mu_arm, pulled=int(rec_arm[r]),
                             scenario=int(rec_scen[r]), fallback=bool(rec_fb[r]),
                             counts_all=rec_counts_p[r] + 1)
        )
    if with_actions:
        actions = {
            "arm": log_arm.copy(),
            "scenario": log_scen.copy(),
            "fallback": log_fb.astype(bool),
        }
        return records, actions
    return records
