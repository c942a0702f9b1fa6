"""Frank-Wolfe self-play dynamics and their diagnostics.

Both players take one-hot steps of size ``1/(n+1)`` toward the vertex that
best responds to the payoff linearized at the current pair, with both
selections evaluated before either vector moves.  The counter starts at 0, so
the first step replaces the state outright and from then on the allocation is
exactly the empirical frequency of pulled arms.

Ties break to the lowest index on both sides; the continuous-time surrogate
is an explicit Euler discretization of the best-response flow with the same
vertex selections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import divergences as dv
from . import model
from .errors import DomainViolation, NonsmoothPoint


@dataclass
class IterateState:
    """Full state of the discrete dynamics: counter and both mixed strategies."""

    n: int
    p: np.ndarray
    mu: np.ndarray


@dataclass
class TrajectoryRecord:
    """One logged point of a run.

    ``step`` is the iteration counter (discrete runs) or the time (flows).
    ``V`` is NaN where the state is not classically differentiable.
    ``pulled_arm``/``chosen_scenario`` are the actions that produced this
    state, or -1 for an initial-state record.
    """

    step: float
    F: float
    V: float
    gap_lb: float
    p: np.ndarray
    mu: np.ndarray
    pulled_arm: int
    chosen_scenario: int
    used_fallback: bool = False
    posterior_rank: int = -1


def select_arm(inst, p, mu) -> int:
    """Smallest index maximizing the allocation gradient of F."""
    g = dv.grad_p_F(inst, p, mu)
    return int(np.argmax(g))


def select_scenario(inst, p) -> int:
    """Smallest scenario arm minimizing D(p, .)."""
    vals = dv.d_values(inst, p)
    return model.scenario_set(inst)[int(np.argmin(vals))]


def fwsp_step(inst, state: IterateState):
    """One simultaneous self-play update.

    Returns the new state together with the pulled arm and chosen scenario.
    Both selections are computed from the incoming state before either
    simplex vector is touched.
    """
    p, mu, n = state.p, state.mu, state.n
    i = select_arm(inst, p, mu)  # raises NonsmoothPoint where undefined
    x = select_scenario(inst, p)
    xpos = model.scenario_position(inst, x)
    step = 1.0 / (n + 1)
    p_new = p + step * (_one_hot(inst.n_arms, i) - p)
    mu_new = mu + step * (_one_hot(inst.n_arms - 1, xpos) - mu)
    return IterateState(n + 1, p_new, mu_new), i, x


def _one_hot(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def lyapunov_V(inst, p, mu) -> float:
    """Sum of both players' linearization residuals; zero exactly at a Nash
    pair and an upper bound on the duality gap."""
    g = dv.grad_p_F(inst, p, mu)
    d = dv.d_values(inst, p)
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return float((g.max() - p @ g) + (mu @ d - d.min()))


def kkt_residuals(inst, p, mu) -> tuple[float, float]:
    """Complementary-slackness residuals for the experimenter and skeptic.

    Each residual adds the worst feasibility violation (a positive part) to
    the worst slackness violation (a mass-weighted absolute deviation); both
    vanish exactly at a Nash equilibrium.
    """
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    g = dv.grad_p_F(inst, p, mu)
    d = dv.d_values(inst, p)
    F = float(mu @ d)
    experimenter = float(np.max(np.abs(p * (g - F))) + np.max(np.maximum(g - F, 0.0)))
    skeptic = float(np.max(np.maximum(F - d, 0.0)) + np.max(np.abs(mu * (d - F))))
    return experimenter, skeptic


def geometric_schedule(n_iters: int) -> list[int]:
    """Powers of two up to ``n_iters``, plus the final step."""
    steps = []
    s = 1
    while s < n_iters:
        steps.append(s)
        s *= 2
    steps.append(n_iters)
    return steps


def resolve_schedule(record_schedule, n_iters: int) -> list[int]:
    if record_schedule is None or record_schedule == "geometric":
        return geometric_schedule(n_iters)
    steps = sorted(set(int(s) for s in record_schedule))
    if steps and (steps[0] < 0 or steps[-1] > n_iters):
        raise DomainViolation(f"record steps must lie in [0, {n_iters}]")
    return steps


def _diagnostics(inst, p, mu):
    """(F, V, gap_lb) at a state; V is NaN off the differentiable set."""
    d = dv.d_values(inst, p)
    F = float(np.asarray(mu) @ d)
    gap_lb = F - float(d.min())
    try:
        V = lyapunov_V(inst, p, mu)
    except NonsmoothPoint:
        V = math.nan
    return F, V, gap_lb


def run_fwsp(inst, p0=None, mu0=None, n_iters: int = 1_000_000,
             record_schedule="geometric") -> list[TrajectoryRecord]:
    """Run the discrete self-play dynamics, recording at scheduled steps.

    The loop runs in a compiled kernel; a pure-NumPy twin
    (`run_fwsp_reference`) with identical semantics backs the tests.  Where a
    gradient evaluation lands on a nonsmooth state (possible in the opening
    steps, before the pulled arms span the feature space) the arm selection
    uses the limiting-gradient rule of `divergences.grad_p_F_clarke`.
    """
    from . import _kernels

    p0, mu0 = _initial_pair(inst, p0, mu0)
    steps = resolve_schedule(record_schedule, n_iters)
    return _kernels.run_fwsp_kernel(inst, p0, mu0, n_iters, steps)


def run_fwsp_reference(inst, p0=None, mu0=None, n_iters: int = 1000,
                       record_schedule="geometric") -> list[TrajectoryRecord]:
    """Interpreted twin of `run_fwsp` (slow; useful for tests and small runs)."""
    p0, mu0 = _initial_pair(inst, p0, mu0)
    steps = resolve_schedule(record_schedule, n_iters)
    schedule = set(steps)
    scen = model.scenario_set(inst)

    records: list[TrajectoryRecord] = []
    p, mu = p0.copy(), mu0.copy()
    counts_p = np.zeros(inst.n_arms, dtype=np.int64)
    counts_mu = np.zeros(inst.n_arms - 1, dtype=np.int64)
    last_arm, last_scen = -1, -1
    if 0 in schedule:
        records.append(_record(inst, 0, p, mu, last_arm, last_scen))
    for n in range(n_iters):
        g = dv.grad_p_F_clarke(inst, p, mu)
        i = int(np.argmax(g))
        d = dv.d_values(inst, p)
        xpos = int(np.argmin(d))
        counts_p[i] += 1
        counts_mu[xpos] += 1
        # counts/(n+1) is the exact closed form of the step-1/(n+1) update
        # chain started at n = 0; it keeps simplex sums at machine precision.
        p = counts_p / (n + 1)
        mu = counts_mu / (n + 1)
        last_arm, last_scen = i, scen[xpos]
        if n + 1 in schedule:
            records.append(_record(inst, n + 1, p, mu, last_arm, last_scen))
    return records


def _record(inst, step, p, mu, arm, scenario) -> TrajectoryRecord:
    F, V, gap_lb = _diagnostics(inst, p, mu)
    return TrajectoryRecord(
        step=step, F=F, V=V, gap_lb=gap_lb, p=p.copy(), mu=mu.copy(),
        pulled_arm=arm, chosen_scenario=scenario,
    )


def _initial_pair(inst, p0, mu0):
    K = inst.n_arms
    if p0 is None:
        p0 = np.full(K, 1.0 / K)
    else:
        p0 = dv.check_simplex(np.asarray(p0, dtype=float), K, "p0")
    if mu0 is None:
        mu0 = np.full(K - 1, 1.0 / (K - 1))
    else:
        mu0 = dv.check_simplex(np.asarray(mu0, dtype=float), K - 1, "mu0")
    return p0, mu0


def euler_flow(inst, p0=None, mu0=None, h: float = 1e-3, T: float = 10.0) -> list[TrajectoryRecord]:
    """Explicit-Euler surrogate for the best-response differential inclusion.

    Steps ``p <- p + h (e_i - p)`` with the same deterministic vertex
    selections as the discrete dynamics; every coordinate keeps a factor
    ``(1-h)`` per step, so strictly positive starts stay strictly positive
    and every evaluation happens on the differentiable set.  Records land
    every ``ceil(1/h)`` steps (about once per unit time) plus the endpoints.
    """
    if not (0.0 < h < 1.0):
        raise DomainViolation("h must lie in (0, 1)")
    if T < 0:
        raise DomainViolation("T must be nonnegative")
    p, mu = _initial_pair(inst, p0, mu0)
    scen = model.scenario_set(inst)
    n_steps = int(round(T / h))
    every = math.ceil(1.0 / h)

    records = [_record(inst, 0.0, p, mu, -1, -1)]
    for k in range(n_steps):
        g = dv.grad_p_F(inst, p, mu)
        i = int(np.argmax(g))
        d = dv.d_values(inst, p)
        xpos = int(np.argmin(d))
        p = p + h * (_one_hot(inst.n_arms, i) - p)
        mu = mu + h * (_one_hot(inst.n_arms - 1, xpos) - mu)
        if (k + 1) % every == 0 or k + 1 == n_steps:
            records.append(_record(inst, (k + 1) * h, p, mu, i, scen[xpos]))
    return records
