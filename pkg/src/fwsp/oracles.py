"""Independent numerical references for validating the closed forms.

These deliberately avoid the analytic shortcuts they certify: the lattice
solver brute-forces the maximin over allocation space, the projection oracle
minimizes the halfspace-constrained quadratic iteratively, and the
finite-difference gradient never sees an analytic derivative.  The inner
Frank-Wolfe maximizer reports a certified *lower* bound only (any feasible
point lower-bounds a maximum); the Lyapunov function is what bounds the gap
from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import divergences as dv
from . import model
from .errors import NonsmoothPoint, TooManyGridPoints

GRID_POINT_CAP = 20_000_000


@dataclass
class GridSolution:
    F_star: float
    p_star: np.ndarray
    certificate: dict  # scenario arm -> D(p_star, x)


def simplex_lattice(K: int, resolution: float, cap: int = GRID_POINT_CAP) -> np.ndarray:
    """All lattice points (integers over N = round(1/resolution)) of the
    K-simplex, in ascending lexicographic order of the count vectors."""
    N = int(round(1.0 / resolution))
    if N < 1:
        raise TooManyGridPoints("resolution must be at most 1")
    n_points = math.comb(N + K - 1, K - 1)
    if n_points > cap:
        raise TooManyGridPoints(
            f"lattice would hold {n_points} points (cap {cap}); coarsen the resolution"
        )
    counts = _compositions(N, K)
    return counts / float(N)


def _compositions(N: int, K: int) -> np.ndarray:
    if K == 1:
        return np.array([[N]], dtype=np.int64)
    blocks = []
    for c in range(N + 1):
        rest = _compositions(N - c, K - 1)
        head = np.full((rest.shape[0], 1), c, dtype=np.int64)
        blocks.append(np.hstack([head, rest]))
    return np.vstack(blocks)


def grid_saddle_solve(inst, resolution: float) -> GridSolution:
    """Brute-force the maximin value over a simplex lattice.

    Enumerates ``g(p) = min_x D(p, x)`` at every lattice point and returns
    the maximizing point (ties resolve to the lexicographically smallest
    count vector, which is the enumeration order).  The result is within
    Lipschitz-constant x resolution of the true game value.
    """
    P = simplex_lattice(inst.n_arms, resolution)
    D = dv.d_values_batch(inst, P)
    g = D.min(axis=1)
    k = int(np.argmax(g))
    scen = model.scenario_set(inst)
    certificate = {x: float(D[k, pos]) for pos, x in enumerate(scen)}
    return GridSolution(F_star=float(g[k]), p_star=P[k].copy(), certificate=certificate)


def inner_max_F(inst, mu, iters: int = 10_000) -> tuple[float, np.ndarray]:
    """Frank-Wolfe lower bound on ``max_q F(q, mu)`` for a fixed mix.

    Classical conditional gradient from the uniform start with step
    ``2/(k+2)``; the index starts at k = 1 so every iterate stays strictly
    interior (a full first step would jump to a vertex, where linear
    instances can be nonsmooth).  Returns the best iterate and its value.
    """
    if iters < 100:
        raise ValueError("iters must be at least 100")
    mu = np.asarray(mu, dtype=float)
    K = inst.n_arms
    p = np.full(K, 1.0 / K)
    restarted = False
    best_val, best_p = -np.inf, p.copy()
    k = 1
    while k <= iters:
        try:
            val = dv.payoff_F(inst, p, mu)
            if val > best_val:
                best_val, best_p = val, p.copy()
            g = dv.grad_p_F(inst, p, mu)
        except NonsmoothPoint:
            if restarted:
                raise
            restarted = True
            p = 0.99 * np.full(K, 1.0 / K) + 0.01 * np.arange(1, K + 1) / np.arange(1, K + 1).sum()
            continue
        i = int(np.argmax(g))
        gamma = 2.0 / (k + 2.0)
        e = np.zeros(K)
        e[i] = 1.0
        p = p + gamma * (e - p)
        k += 1
    val = dv.payoff_F(inst, p, mu)
    if val > best_val:
        best_val, best_p = val, p.copy()
    return float(best_val), best_p


def fd_gradient(f, p, h: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Central differences on the nonnegative cone (no renormalization).

    Falls back to a one-sided difference on coordinates within ``h`` of the
    boundary and flags them in the returned mask.
    """
    if not (1e-8 <= h <= 1e-4):
        raise ValueError("h must lie in [1e-8, 1e-4]")
    p = np.asarray(p, dtype=float)
    g = np.empty_like(p)
    one_sided = np.zeros(p.shape, dtype=bool)
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        if p[i] < h:
            g[i] = (f(p + e) - f(p)) / h
            one_sided[i] = True
        else:
            g[i] = (f(p + e) - f(p - e)) / (2.0 * h)
    return g, one_sided


def halfspace_projection_oracle(inst, p, x: int, iters: int = 10_000) -> tuple[float, np.ndarray]:
    """Projected-gradient minimizer of ``0.5 ||v - theta||_Vp^2`` over the
    halfspace where arm ``x`` matches the best arm.

    Step size 1/L with L the top eigenvalue of Vp; the halfspace projection
    is closed-form, so each iterate is feasible and the value sequence is
    monotone.
    """
    istar = model.best_arm(inst)
    V = dv.design_matrix(inst, p)
    delta = dv.scenario_delta(inst, x, istar)
    theta = inst.theta
    L = float(np.linalg.eigvalsh(V)[-1])
    dn2 = float(delta @ delta)

    def project(v):
        s = float(delta @ v)
        if s > 0.0:
            return v - (s / dn2) * delta
        return v

    v = project(theta)
    for _ in range(iters):
        grad = V @ (v - theta)
        v = project(v - grad / L)
    value = 0.5 * float((v - theta) @ V @ (v - theta))
    return value, v
