"""Problem instances and their derived quantities.

An instance is either a Gaussian linear bandit (arm features, shared
parameter vector) or an unstructured bandit whose arms follow a canonical
one-parameter exponential family parameterized by its mean.  Identification
targets the unique best arm; the confusing scenarios are the remaining arms,
kept in ascending index order everywhere (mix vectors, CSV columns).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainViolation, NonUniqueBestArm

LINEAR = "linear"
UNSTRUCTURED = "unstructured"

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"
POISSON = "poisson"

_FAMILIES = (GAUSSIAN, BERNOULLI, POISSON)


@dataclass(frozen=True)
class BanditInstance:
    """A best-arm identification problem.

    Parameters
    ----------
    kind : {"linear", "unstructured"}
        Linear instances have mean rewards ``a_i @ theta``; unstructured
        instances have mean rewards ``theta_i`` (identity features).
    theta : ndarray
        True parameter, shape ``(d,)`` for linear and ``(K,)`` otherwise.
    features : ndarray or None
        Arm feature matrix of shape ``(K, d)``; linear instances only.
    family : {"gaussian", "bernoulli", "poisson"}
        Observation family.  Linear instances are always Gaussian.
    variances : ndarray or None
        Per-arm observation variances; Gaussian families only.  Defaults to
        all ones.

    Instances are immutable after validation and safe to share across
    concurrent runs.
    """

    kind: str
    theta: np.ndarray
    features: np.ndarray | None = None
    family: str = GAUSSIAN
    variances: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        if self.features is not None:
            object.__setattr__(
                self, "features", np.asarray(self.features, dtype=float)
            )
        if self.variances is not None:
            object.__setattr__(
                self, "variances", np.asarray(self.variances, dtype=float)
            )

    @property
    def n_arms(self) -> int:
        if self.kind == LINEAR:
            return self.features.shape[0]
        return self.theta.shape[0]

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    @property
    def sigma2(self) -> np.ndarray:
        """Observation variances, defaulting to ones for Gaussian families."""
        if self.variances is not None:
            return self.variances
        return np.ones(self.n_arms)

    def feature_matrix(self) -> np.ndarray:
        """Arm features; the identity for unstructured instances."""
        if self.kind == LINEAR:
            return self.features
        return np.eye(self.n_arms)


def validate_instance(inst: BanditInstance) -> None:
    """Check all instance invariants, raising on the first violation.

    Raises
    ------
    DimensionMismatch
        Incoherent shapes of theta, features, or variances.
    DomainViolation
        Parameter outside the family's natural domain (also wrong kind /
        family combinations).
    NonUniqueBestArm
        Exact tie for the maximal mean reward.  Near-ties are deliberately
        not detected; uniqueness is checked with exact comparison.
    """
    if inst.kind not in (LINEAR, UNSTRUCTURED):
        raise DomainViolation(f"unknown kind {inst.kind!r}")
    if inst.family not in _FAMILIES:
        raise DomainViolation(f"unknown family {inst.family!r}")
    if inst.theta.ndim != 1 or inst.theta.shape[0] < 1:
        raise DimensionMismatch("theta must be a nonempty vector")

    if inst.kind == LINEAR:
        if inst.family != GAUSSIAN:
            raise DomainViolation("linear instances are Gaussian")
        if inst.features is None or inst.features.ndim != 2:
            raise DimensionMismatch("linear instances need a K x d feature matrix")
        K, d = inst.features.shape
        if d != inst.theta.shape[0]:
            raise DimensionMismatch(
                f"features have width {d} but theta has length {inst.theta.shape[0]}"
            )
    else:
        if inst.features is not None:
            raise DimensionMismatch("unstructured instances carry no features")
        K = inst.theta.shape[0]

    if K < 2:
        raise DimensionMismatch("need at least two arms")

    if inst.family == GAUSSIAN:
        s2 = inst.sigma2
        if s2.shape != (K,):
            raise DimensionMismatch("variances must have one entry per arm")
        if not np.all(s2 > 0):
            raise DomainViolation("variances must be positive")
    elif inst.variances is not None:
        raise DomainViolation(f"{inst.family} arms have no free variance")

    m = mean_rewards(inst)
    if inst.family == BERNOULLI and not np.all((m > 0) & (m < 1)):
        raise DomainViolation("Bernoulli means must lie in (0, 1)")
    if inst.family == POISSON and not np.all(m > 0):
        raise DomainViolation("Poisson means must be positive")

    best_arm(inst)  # raises NonUniqueBestArm on an exact tie


def mean_rewards(inst: BanditInstance) -> np.ndarray:
    """Per-arm mean rewards: ``features @ theta`` or ``theta`` itself."""
    if inst.kind == LINEAR:
        return inst.features @ inst.theta
    return inst.theta.copy()


def best_arm(inst: BanditInstance) -> int:
    """Index of the unique highest-mean arm (0-based)."""
    m = mean_rewards(inst)
    top = int(np.argmax(m))
    if int(np.sum(m == m[top])) > 1:
        raise NonUniqueBestArm(f"arms tied at mean {m[top]!r}")
    return top


def scenario_set(inst: BanditInstance) -> list[int]:
    """All confusing arms, ascending: every index except the best arm."""
    star = best_arm(inst)
    return [i for i in range(inst.n_arms) if i != star]


def scenario_position(inst: BanditInstance, x: int) -> int:
    """Position of scenario arm ``x`` in the canonical ascending order."""
    star = best_arm(inst)
    if x == star or not 0 <= x < inst.n_arms:
        raise DomainViolation(f"arm {x} is not a scenario of this instance")
    return x if x < star else x - 1


def as_linear(inst: BanditInstance) -> BanditInstance:
    """Identity-feature linear view of an unstructured Gaussian instance.

    Exists for oracle-equivalence checks only; the unstructured closed forms
    remain the production path.
    """
    if inst.kind == LINEAR:
        return inst
    if inst.family != GAUSSIAN:
        raise DomainViolation("only Gaussian instances have a linear view")
    return BanditInstance(
        kind=LINEAR,
        theta=inst.theta.copy(),
        features=np.eye(inst.n_arms),
        variances=inst.sigma2.copy(),
    )


def with_theta(inst: BanditInstance, theta: np.ndarray) -> BanditInstance:
    """Same design, different parameter (used when acting on a sampled theta)."""
    return BanditInstance(
        kind=inst.kind,
        theta=np.asarray(theta, dtype=float),
        features=None if inst.features is None else inst.features,
        family=inst.family,
        variances=None if inst.variances is None else inst.variances,
    )


def instance_from_dict(spec: dict) -> BanditInstance:
    """Build and validate an instance from its JSON dictionary form.

    Schema: ``{"kind": "linear"|"unstructured", "family": ...,
    "theta": [...], "features": [[...], ...] (linear only),
    "variances": [...]}`` with variances defaulting to all ones.
    """
    kind = spec.get("kind")
    if kind not in (LINEAR, UNSTRUCTURED):
        raise DomainViolation(f"instance kind must be linear/unstructured, got {kind!r}")
    family = spec.get("family", GAUSSIAN)
    variances = spec.get("variances")
    inst = BanditInstance(
        kind=kind,
        theta=np.asarray(spec["theta"], dtype=float),
        features=None if kind == UNSTRUCTURED else np.asarray(spec["features"], dtype=float),
        family=family,
        variances=None
        if (variances is None and family != GAUSSIAN)
        else (np.asarray(variances, dtype=float) if variances is not None else None),
    )
    validate_instance(inst)
    return inst


def instance_to_dict(inst: BanditInstance) -> dict:
    out = {"kind": inst.kind, "family": inst.family, "theta": inst.theta.tolist()}
    if inst.kind == LINEAR:
        out["features"] = inst.features.tolist()
    if inst.family == GAUSSIAN:
        out["variances"] = inst.sigma2.tolist()
    return out


def load_instance(path) -> BanditInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
