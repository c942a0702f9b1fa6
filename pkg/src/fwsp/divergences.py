"""Scenario divergences, their gradients, and the mixed payoff.

For a confusing arm ``x`` the divergence ``D(p, x)`` is the smallest
allocation-weighted KL information separating the true parameter from the
most misleading alternative in which ``x`` beats the best arm.  Both closed
forms used here come from projecting onto a halfspace:

* unstructured one-parameter families: the inner minimizer is the pooled
  mean of the two involved arms, and the two nonzero gradient entries are
  per-arm KLs at that pooled mean;
* Gaussian linear bandits: ``D(p, x) = gap_x^2 / (2 * delta_x' Vp^+ delta_x)``
  with ``Vp = sum_i p_i a_i a_i' / sigma_i^2`` and the Moore-Penrose
  pseudoinverse taken on the active feature span.  Out-of-span scenarios have
  ``D = 0`` and no classical gradient.

All functions are pure; allocations live on the nonnegative cone (the
divergences are positively homogeneous, so nothing here requires exact
simplex normalization).
"""

from __future__ import annotations

import math

import numpy as np

from . import model
from .errors import DomainViolation, NonsmoothPoint, ScenarioOutOfSpan

# Span detection thresholds.  The eigenvalue cutoff is relative to the top
# eigenvalue of Vp; a direction counts as in-span when its projection onto
# the numerical null space is below SPAN_RESIDUAL_TOL relative to its norm.
SPAN_EIG_CUTOFF = 1e-10
SPAN_RESIDUAL_TOL = 1e-8

SIMPLEX_TOL = 1e-12


def check_simplex(v: np.ndarray, size: int, name: str = "vector") -> np.ndarray:
    """Validate a simplex point: correct length, nonnegative, sums to one."""
    v = np.asarray(v, dtype=float)
    if v.shape != (size,):
        raise DomainViolation(f"{name} must have length {size}, got shape {v.shape}")
    if np.any(v < 0):
        raise DomainViolation(f"{name} has negative entries")
    if abs(v.sum() - 1.0) > SIMPLEX_TOL:
        raise DomainViolation(f"{name} sums to {v.sum()!r}, not 1")
    return v


def normalize_external(v, size: int, name: str = "vector") -> np.ndarray:
    """Defensive renormalization for vectors read from external input.

    Internal updates preserve sums in closed form and never pass through
    here.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (size,):
        raise DomainViolation(f"{name} must have length {size}, got shape {v.shape}")
    if np.any(v < 0):
        raise DomainViolation(f"{name} has negative entries")
    s = v.sum()
    if s <= 0:
        raise DomainViolation(f"{name} must have positive total mass")
    return v / s


def kl_divergence(family: str, theta_mean: float, lambda_mean: float, sigma2: float = 1.0) -> float:
    """KL divergence between two members of a mean-parameterized family.

    Gaussian: ``(theta - lam)^2 / (2 sigma2)``;
    Bernoulli: ``theta log(theta/lam) + (1-theta) log((1-theta)/(1-lam))``;
    Poisson: ``theta log(theta/lam) - theta + lam``.
    """
    t, lam = float(theta_mean), float(lambda_mean)
    if family == model.GAUSSIAN:
        if sigma2 <= 0:
            raise DomainViolation("Gaussian KL needs a positive variance")
        return (t - lam) ** 2 / (2.0 * sigma2)
    if t == lam:
        return 0.0
    if family == model.BERNOULLI:
        if not (0.0 <= t <= 1.0):
            raise DomainViolation(f"Bernoulli mean {t} outside [0, 1]")
        if not (0.0 < lam < 1.0):
            raise DomainViolation(f"Bernoulli alternative mean {lam} on the boundary")
        out = 0.0
        if t > 0.0:
            out += t * math.log(t / lam)
        if t < 1.0:
            out += (1.0 - t) * math.log((1.0 - t) / (1.0 - lam))
        return out
    if family == model.POISSON:
        if t < 0.0:
            raise DomainViolation(f"Poisson mean {t} negative")
        if lam <= 0.0:
            raise DomainViolation(f"Poisson alternative mean {lam} not positive")
        if t == 0.0:
            return lam
        return t * math.log(t / lam) - t + lam
    raise DomainViolation(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Unstructured instances
# ---------------------------------------------------------------------------


def pooled_minimizer(inst, p, x: int, istar: int | None = None) -> float:
    """The inner minimizer of ``p_I KL(th_I||lam) + p_x KL(th_x||lam)``.

    For a common one-parameter family this is the allocation-weighted mean of
    the two arm means; with heterogeneous Gaussian variances the weights are
    precision-scaled (the stationarity condition divides by each arm's
    variance).
    """
    if istar is None:
        istar = model.best_arm(inst)
    th = inst.theta
    wi, wx = float(p[istar]), float(p[x])
    if inst.family == model.GAUSSIAN:
        s2 = inst.sigma2
        wi /= s2[istar]
        wx /= s2[x]
    return (wi * th[istar] + wx * th[x]) / (wi + wx)


def d_value_unstructured(inst, p, x: int) -> float:
    """Divergence against scenario ``x`` for an unstructured instance.

    Returns 0 by convention when neither involved arm carries mass (the
    divergence is continuous there but not differentiable).
    """
    istar = model.best_arm(inst)
    pi, px = float(p[istar]), float(p[x])
    if pi + px <= 0.0:
        return 0.0
    lam = pooled_minimizer(inst, p, x, istar)
    s2 = inst.sigma2
    return pi * kl_divergence(inst.family, inst.theta[istar], lam, s2[istar]) + px * kl_divergence(
        inst.family, inst.theta[x], lam, s2[x]
    )


def d_grad_unstructured(inst, p, x: int) -> np.ndarray:
    """Gradient of the unstructured divergence on the nonnegative cone.

    Exactly two entries can be nonzero: the best arm's (its KL at the pooled
    mean) and scenario arm's.  Raises ``NonsmoothPoint`` at the corner where
    both allocations vanish.
    """
    istar = model.best_arm(inst)
    pi, px = float(p[istar]), float(p[x])
    if pi + px <= 0.0:
        raise NonsmoothPoint(
            f"D(., {x}) is not differentiable where arms {istar} and {x} both have zero mass"
        )
    lam = pooled_minimizer(inst, p, x, istar)
    s2 = inst.sigma2
    g = np.zeros(inst.n_arms)
    g[istar] = kl_divergence(inst.family, inst.theta[istar], lam, s2[istar])
    g[x] = kl_divergence(inst.family, inst.theta[x], lam, s2[x])
    return g


# ---------------------------------------------------------------------------
# Gaussian linear instances
# ---------------------------------------------------------------------------


def design_matrix(inst, p) -> np.ndarray:
    """Allocation-weighted information matrix ``sum_i p_i a_i a_i' / s2_i``."""
    A = inst.features
    w = np.asarray(p, dtype=float) / inst.sigma2
    return (A.T * w) @ A


def pinv_psd(V: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Uses a symmetric eigendecomposition with a relative eigenvalue cutoff so
    span membership is decided consistently with `in_active_span`.
    """
    w, Q = np.linalg.eigh(V)
    wmax = w[-1]
    if wmax <= 0.0:
        return np.zeros_like(V)
    keep = w > SPAN_EIG_CUTOFF * wmax
    winv = np.zeros_like(w)
    winv[keep] = 1.0 / w[keep]
    return (Q * winv) @ Q.T


def in_active_span(V: np.ndarray, Vinv: np.ndarray, delta: np.ndarray) -> bool:
    """Whether ``delta`` lies in the range of ``V`` (within tolerance)."""
    r = delta - V @ (Vinv @ delta)
    return float(np.linalg.norm(r)) <= SPAN_RESIDUAL_TOL * float(np.linalg.norm(delta))


def scenario_delta(inst, x: int, istar: int | None = None) -> np.ndarray:
    if istar is None:
        istar = model.best_arm(inst)
    A = inst.features
    return A[istar] - A[x]


def closest_alternative_linear(inst, p, x: int) -> np.ndarray:
    """The most misleading parameter for scenario ``x`` at allocation ``p``.

    Projects ``theta`` onto the halfspace where arm ``x`` matches the best
    arm, in the ``Vp`` metric; the optimum sits on the boundary hyperplane.

    Raises
    ------
    ScenarioOutOfSpan
        When ``a_I - a_x`` leaves the active span, where the projection is
        not unique (and ``D = 0``).
    """
    istar = model.best_arm(inst)
    V = design_matrix(inst, p)
    Vinv = pinv_psd(V)
    delta = scenario_delta(inst, x, istar)
    if not in_active_span(V, Vinv, delta):
        raise ScenarioOutOfSpan(f"scenario {x} direction leaves the active span")
    gap = float(delta @ inst.theta)
    quad = float(delta @ Vinv @ delta)
    # gap > 0 on valid instances; the clamp covers callers probing a theta
    # already inside the alternative halfspace, where theta itself is closest.
    coef = max(gap, 0.0) / quad
    return inst.theta - coef * (Vinv @ delta)


def d_value_linear(inst, p, x: int) -> float:
    """Divergence ``gap^2 / (2 delta' Vp^+ delta)``; 0 out of span."""
    istar = model.best_arm(inst)
    V = design_matrix(inst, p)
    Vinv = pinv_psd(V)
    delta = scenario_delta(inst, x, istar)
    if not in_active_span(V, Vinv, delta):
        return 0.0
    gap = float(delta @ inst.theta)
    quad = float(delta @ Vinv @ delta)
    return gap * gap / (2.0 * quad)


def d_grad_linear(inst, p, x: int) -> np.ndarray:
    """Gradient of the linear divergence at an in-span allocation.

    Entry ``i`` is ``(a_i' Vp^+ delta)^2 * gap^2 / (2 s2_i quad^2)``, which
    coincides with the per-arm KL against the closest alternative.
    """
    istar = model.best_arm(inst)
    V = design_matrix(inst, p)
    Vinv = pinv_psd(V)
    delta = scenario_delta(inst, x, istar)
    if not in_active_span(V, Vinv, delta):
        raise ScenarioOutOfSpan(f"scenario {x} direction leaves the active span")
    gap = float(delta @ inst.theta)
    quad = float(delta @ Vinv @ delta)
    proj = inst.features @ (Vinv @ delta)
    return (gap * gap / 2.0) * proj**2 / (quad * quad) / inst.sigma2


# ---------------------------------------------------------------------------
# Kind dispatch and the mixed payoff
# ---------------------------------------------------------------------------


def d_value(inst, p, x: int) -> float:
    if inst.kind == model.LINEAR:
        return d_value_linear(inst, p, x)
    return d_value_unstructured(inst, p, x)


def d_grad(inst, p, x: int) -> np.ndarray:
    if inst.kind == model.LINEAR:
        return d_grad_linear(inst, p, x)
    return d_grad_unstructured(inst, p, x)


def d_values(inst, p) -> np.ndarray:
    """Divergences against every scenario, in canonical order."""
    return np.array([d_value(inst, p, x) for x in model.scenario_set(inst)])


def payoff_F(inst, p, mu) -> float:
    """Mixed payoff: the mu-weighted average of scenario divergences."""
    return float(np.dot(np.asarray(mu, dtype=float), d_values(inst, p)))


def grad_p_F(inst, p, mu) -> np.ndarray:
    """Allocation gradient ``sum_x mu_x grad D(p, x)``.

    Only scenarios carrying mass are differentiated, so exact zeros in
    ``mu`` do not force smoothness where it is not needed.
    """
    scen = model.scenario_set(inst)
    g = np.zeros(inst.n_arms)
    for pos, x in enumerate(scen):
        w = float(mu[pos])
        if w > 0.0:
            g += w * d_grad(inst, p, x)
    return g


def grad_mu_F(inst, p, mu=None) -> np.ndarray:
    """Mix gradient: entry ``x`` is ``D(p, x)`` (independent of mu)."""
    return d_values(inst, p)


def grad_p_F_clarke(inst, p, mu, eps: float = 1e-6) -> np.ndarray:
    """Allocation gradient with a limiting-gradient fallback.

    Where the exact gradient is undefined (a massed scenario is out of span,
    or both of an unstructured scenario's arms are unallocated) this returns
    the gradient at the nearby interior point ``(1-eps) p + eps uniform``, a
    limiting gradient in the Clarke sense.  The discrete dynamics hit such
    states only while the pulled arms do not yet span the feature space, and
    this selection concentrates mass on exactly the arms that expand it.
    """
    try:
        return grad_p_F(inst, p, mu)
    except NonsmoothPoint:
        p_eps = (1.0 - eps) * np.asarray(p, dtype=float) + eps / inst.n_arms
        return grad_p_F(inst, p_eps, mu)


def gradient_bound(inst) -> float:
    """A per-instance ceiling for ``max_x ||grad D(., x)||_inf``.

    Computed from pairwise KLs between the best arm's mean and each
    scenario's mean, at the least favorable variance.
    """
    m = model.mean_rewards(inst)
    istar = model.best_arm(inst)
    s2 = inst.sigma2
    if inst.kind == model.LINEAR:
        gaps = np.array([m[istar] - m[x] for x in model.scenario_set(inst)])
        return float(np.max(gaps**2) / (2.0 * np.min(s2)))
    worst = 0.0
    for x in model.scenario_set(inst):
        worst = max(
            worst,
            kl_divergence(inst.family, m[istar], m[x], s2[istar]),
            kl_divergence(inst.family, m[x], m[istar], s2[x]),
        )
    return worst


# ---------------------------------------------------------------------------
# Batched evaluation (vectorized mirror of the closed forms, used by the
# lattice solver)
# ---------------------------------------------------------------------------


def _kl_vec(family: str, t: float, lam: np.ndarray, s2: float) -> np.ndarray:
    """Vectorized KL for a fixed first argument; lam assumed in-domain."""
    if family == model.GAUSSIAN:
        return (t - lam) ** 2 / (2.0 * s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == model.BERNOULLI:
            out = t * np.log(t / lam) + (1.0 - t) * np.log((1.0 - t) / (1.0 - lam))
        else:
            out = t * np.log(t / lam) - t + lam
    return np.where(lam == t, 0.0, out)


def d_values_batch(inst, P: np.ndarray) -> np.ndarray:
    """Divergences for a batch of allocations, shape ``(M, K-1)``.

    Same closed forms, cutoff, and span test as the scalar path; equality is
    covered by tests so the lattice solver can rely on it.
    """
    P = np.asarray(P, dtype=float)
    istar = model.best_arm(inst)
    scen = model.scenario_set(inst)
    m = model.mean_rewards(inst)
    if inst.kind == model.UNSTRUCTURED:
        out = np.empty((P.shape[0], len(scen)))
        th = inst.theta
        s2 = inst.sigma2
        for pos, x in enumerate(scen):
            pi, px = P[:, istar], P[:, x]
            wi, wx = pi / s2[istar], px / s2[x]
            tot = wi + wx
            lam = np.where(tot > 0, (wi * th[istar] + wx * th[x]) / np.where(tot > 0, tot, 1.0), th[istar])
            kli = _kl_vec(inst.family, th[istar], lam, s2[istar])
            klx = _kl_vec(inst.family, th[x], lam, s2[x])
            out[:, pos] = np.where(pi + px > 0, pi * kli + px * klx, 0.0)
        return out

    A = inst.features
    S = A[:, :, None] * A[:, None, :] / inst.sigma2[:, None, None]
    V = np.einsum("mk,kij->mij", P, S)
    w, Q = np.linalg.eigh(V)
    wmax = np.maximum(w[:, -1], 0.0)
    keep = w > SPAN_EIG_CUTOFF * wmax[:, None]
    winv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    out = np.empty((P.shape[0], len(scen)))
    for pos, x in enumerate(scen):
        delta = A[istar] - A[x]
        u = np.einsum("mij,i->mj", Q, delta)
        quad = np.sum(u * u * winv, axis=1)
        resid2 = np.sum(np.where(keep, 0.0, u * u), axis=1)
        inspan = np.sqrt(np.maximum(resid2, 0.0)) <= SPAN_RESIDUAL_TOL * np.linalg.norm(delta)
        gap = m[istar] - m[x]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = gap * gap / (2.0 * quad)
        out[:, pos] = np.where(inspan & (quad > 0), val, 0.0)
    return out
