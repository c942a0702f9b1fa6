"""Posterior-sampling self-play for Gaussian linear bandits.

Each round samples a parameter from the flat-prior (ridge-stabilized)
Gaussian posterior, lets a second batch of posterior draws nominate a
confusing scenario by rejection, updates the scenario mix *first*, then takes
the experimenter's greedy step against the already-updated mix -- the one
place the learning loop deliberately differs from the simultaneous
non-learning update.

Round-t draw order (one stream per replication, seeded ``base_seed + rep``):
theta_hat (d normals per attempt, re-drawn on exact best-arm ties up to 10
times), rejection candidates (d normals each, up to ``max_attempts``), then
one reward normal.  Warm-up consumes one reward normal per arm.  When the
posterior is so concentrated that even ``max_attempts`` candidates have
probability below 1e-20 of landing in the alternative region, the rejection
loop is skipped outright (certified by a Gaussian tail union bound) and the
fallback fires without consuming draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _numeric, divergences as dv, model
from .dynamics import TrajectoryRecord, _diagnostics, resolve_schedule
from .errors import CholeskyFailure, DomainViolation
from .rng import CounterRng

DEFAULT_RIDGE = 1e-6
DEFAULT_MAX_ATTEMPTS = 1000
REJECTION_SKIP_TOL = 1e-20
TIE_REDRAWS = 10
TIE_PERTURBATION = 1e-12


@dataclass
class PosteriorState:
    """Sufficient statistics of the Gaussian linear posterior.

    ``precision`` is ``ridge * I + sum_i n_i a_i a_i' / s2_i`` and ``cov``
    caches its inverse through rank-one updates; ``moment`` is the
    reward-weighted feature sum, ``counts``/``means`` the per-arm pull counts
    and running sample means.
    """

    precision: np.ndarray
    cov: np.ndarray
    moment: np.ndarray
    counts: np.ndarray
    means: np.ndarray
    ridge: float

    def copy(self) -> "PosteriorState":
        return PosteriorState(
            self.precision.copy(), self.cov.copy(), self.moment.copy(),
            self.counts.copy(), self.means.copy(), self.ridge,
        )


def fresh_posterior(inst, ridge: float = DEFAULT_RIDGE) -> PosteriorState:
    if inst.kind != model.LINEAR:
        raise DomainViolation("the learning loop handles Gaussian linear instances")
    if ridge <= 0:
        raise DomainViolation("ridge must be positive")
    d, K = inst.dim, inst.n_arms
    return PosteriorState(
        precision=ridge * np.eye(d),
        cov=np.eye(d) / ridge,
        moment=np.zeros(d),
        counts=np.zeros(K, dtype=np.int64),
        means=np.zeros(K),
        ridge=ridge,
    )


def posterior_update(state: PosteriorState, inst, arm: int, reward: float) -> PosteriorState:
    """Absorb one observation; pure rank-one update of both caches."""
    out = state.copy()
    a = inst.features[arm]
    inv_s2 = 1.0 / inst.sigma2[arm]
    out.precision += inv_s2 * np.outer(a, a)
    _numeric.sm_update(out.cov, a * math.sqrt(inv_s2))
    out.moment += inv_s2 * reward * a
    out.counts[arm] += 1
    out.means[arm] += (reward - out.means[arm]) / out.counts[arm]
    return out


def posterior_from_counts(inst, counts, means, ridge: float = DEFAULT_RIDGE) -> PosteriorState:
    """Batch reconstruction from (count, mean) sufficient statistics."""
    counts = np.asarray(counts, dtype=np.int64)
    means = np.asarray(means, dtype=float)
    A = inst.features
    w = counts / inst.sigma2
    precision = ridge * np.eye(inst.dim) + (A.T * w) @ A
    return PosteriorState(
        precision=precision,
        cov=np.linalg.inv(precision),
        moment=A.T @ (w * means),
        counts=counts.copy(),
        means=means.copy(),
        ridge=ridge,
    )


def posterior_mean(state: PosteriorState) -> np.ndarray:
    return _numeric.mat_vec(state.cov, state.moment)


def posterior_rank(inst, counts) -> int:
    """Rank of the ridge-free information matrix for the given pull counts."""
    w = np.asarray(counts, dtype=float) / inst.sigma2
    V = (inst.features.T * w) @ inst.features
    ev = np.linalg.eigvalsh(V)
    top = ev[-1]
    if top <= 0:
        return 0
    return int(np.sum(ev > 1e-10 * top))


def posterior_sample(state: PosteriorState, rng: CounterRng) -> np.ndarray:
    """One draw from ``N(cov @ moment, cov)`` via the lower Cholesky factor."""
    L, ok = _numeric.chol_lower(state.cov)
    if not ok:
        raise CholeskyFailure("posterior covariance is not positive definite")
    z = rng.normals(state.cov.shape[0])
    return _numeric.gaussian_draw(posterior_mean(state), L, z)


def draw_theta_hat(inst, state: PosteriorState, rng: CounterRng) -> np.ndarray:
    """Posterior draw with a unique best arm.

    Exact ties are measure-zero but possible in floats: redraw a few times,
    then nudge the first coordinate.
    """
    theta = posterior_sample(state, rng)
    for _ in range(TIE_REDRAWS):
        _, ties = _numeric.argmax_dot(inst.features, theta)
        if ties == 1:
            return theta
        theta = posterior_sample(state, rng)
    theta = theta.copy()
    theta[0] += TIE_PERTURBATION
    return theta


def sample_alternative(inst, state: PosteriorState, theta_hat, p, rng: CounterRng,
                       max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> tuple[int, bool]:
    """Nominate a scenario by rejection from the posterior.

    Draws candidates until one makes some arm beat ``theta_hat``'s best arm
    and returns the smallest such arm.  On exhaustion (or when acceptance is
    certifiably negligible, see module docstring) falls back to the
    informational argmin ``argmin_x D(p, x; theta_hat)`` and flags it.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    A = inst.features
    ihat, _ = _numeric.argmax_dot(A, theta_hat)
    mean = posterior_mean(state)
    L, ok = _numeric.chol_lower(state.cov)
    if not ok:
        raise CholeskyFailure("posterior covariance is not positive definite")
    q_ub = _numeric.alt_accept_bound(A, mean, L, ihat)
    if max_attempts * q_ub >= REJECTION_SKIP_TOL:
        for _ in range(max_attempts):
            z = rng.normals(inst.dim)
            cand = _numeric.gaussian_draw(mean, L, z)
            x = int(_numeric.first_beating_arm(A, cand, ihat))
            if x >= 0:
                return x, False
    inst_hat = model.with_theta(inst, theta_hat)
    scen = [i for i in range(inst.n_arms) if i != ihat]
    vals = [dv.d_value_linear(inst_hat, p, x) for x in scen]
    return scen[int(np.argmin(vals))], True


def simulate_reward(inst, arm: int, rng: CounterRng) -> float:
    """Gaussian reward draw with the arm's true mean and variance."""
    m = model.mean_rewards(inst)[arm]
    return float(m + math.sqrt(inst.sigma2[arm]) * rng.normal())


def select_arm_learning(inst, theta_hat, p, mu_arm) -> int:
    """Greedy arm against the (already updated) arm-indexed scenario mix.

    Mass sitting on ``theta_hat``'s own best arm is not a scenario under
    ``theta_hat`` and contributes nothing to the linearization.
    """
    inst_hat = model.with_theta(inst, np.asarray(theta_hat, dtype=float))
    ihat, _ = _numeric.argmax_dot(inst.features, np.asarray(theta_hat, dtype=float))
    scen = [i for i in range(inst.n_arms) if i != int(ihat)]
    weights = np.asarray(mu_arm, dtype=float)[scen]
    g = dv.grad_p_F_clarke(inst_hat, p, weights)
    return int(np.argmax(g))


def run_learning(inst_true, T: int, seed: int, record_schedule="geometric",
                 ridge: float = DEFAULT_RIDGE, max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                 with_actions: bool = False):
    """Run the posterior-sampling loop; records are evaluated under the truth.

    Executes in a compiled kernel sharing the draw primitives with the
    interpreted twin `run_learning_reference`.  Returns the trajectory
    records, plus the per-round action log when ``with_actions`` is set.
    """
    from . import _kernels

    model.validate_instance(inst_true)
    if inst_true.kind != model.LINEAR:
        raise DomainViolation("the learning loop handles Gaussian linear instances")
    if T < 1:
        raise DomainViolation("T must be at least 1")
    steps = resolve_schedule(record_schedule, T)
    return _kernels.run_learning_kernel(
        inst_true, T, seed, steps, ridge, max_attempts, with_actions
    )


def run_learning_reference(inst_true, T: int, seed: int, record_schedule="geometric",
                           ridge: float = DEFAULT_RIDGE,
                           max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                           with_actions: bool = False):
    """Interpreted twin of `run_learning` (slow; tests and small runs)."""
    model.validate_instance(inst_true)
    if inst_true.kind != model.LINEAR:
        raise DomainViolation("the learning loop handles Gaussian linear instances")
    K = inst_true.n_arms
    steps = resolve_schedule(record_schedule, T)
    schedule = set(steps)
    rng = CounterRng(seed)

    state = fresh_posterior(inst_true, ridge)
    records: list[TrajectoryRecord] = []
    uniform_p = np.full(K, 1.0 / K)
    uniform_mu_arm = np.full(K, 1.0 / K)
    for j in range(K):
        y = simulate_reward(inst_true, j, rng)
        state = posterior_update(state, inst_true, j, y)
        records.append(
            _learning_record(inst_true, -K + j, uniform_p, uniform_mu_arm,
                             pulled=j, scenario=-1, fallback=False,
                             counts_all=state.counts)
        )

    counts_p = np.zeros(K, dtype=np.int64)
    counts_mu = np.zeros(K, dtype=np.int64)
    p = uniform_p.copy()
    log_arm, log_scen, log_fb = [], [], []
    for t in range(T):
        theta_hat = draw_theta_hat(inst_true, state, rng)
        x_t, fb = sample_alternative(inst_true, state, theta_hat, p, rng, max_attempts)
        counts_mu[x_t] += 1
        mu_arm = counts_mu / (t + 1)
        i_t = select_arm_learning(inst_true, theta_hat, p, mu_arm)
        counts_p[i_t] += 1
        p = counts_p / (t + 1)
        y = simulate_reward(inst_true, i_t, rng)
        state = posterior_update(state, inst_true, i_t, y)
        if with_actions:
            log_arm.append(i_t)
            log_scen.append(x_t)
            log_fb.append(fb)
        if t + 1 in schedule:
            records.append(
                _learning_record(inst_true, t + 1, p, mu_arm, pulled=i_t,
                                 scenario=x_t, fallback=fb, counts_all=state.counts)
            )
    if with_actions:
        actions = {
            "arm": np.array(log_arm, dtype=np.int64),
            "scenario": np.array(log_scen, dtype=np.int64),
            "fallback": np.array(log_fb, dtype=bool),
        }
        return records, actions
    return records


def restrict_mix(inst, mu_arm) -> np.ndarray:
    """Arm-indexed mix restricted to the true scenarios and renormalized.

    Mass can land on the true best arm only while the posterior still
    misidentifies it; that mass decays as 1/t, and renormalizing keeps the
    recorded mix a valid simplex point for the ground-truth diagnostics.
    """
    scen = model.scenario_set(inst)
    mu = np.asarray(mu_arm, dtype=float)[scen]
    s = mu.sum()
    if s <= 0.0:
        return np.full(len(scen), 1.0 / len(scen))
    return mu / s


def _learning_record(inst, step, p, mu_arm, pulled, scenario, fallback, counts_all):
    mu = restrict_mix(inst, mu_arm)
    F, V, gap_lb = _diagnostics(inst, p, mu)
    return TrajectoryRecord(
        step=step, F=F, V=V, gap_lb=gap_lb, p=np.asarray(p, dtype=float).copy(),
        mu=mu, pulled_arm=pulled, chosen_scenario=scenario,
        used_fallback=bool(fallback),
        posterior_rank=posterior_rank(inst, counts_all),
    )
