"""Built-in benchmark instances and their known saddle points.

Arm and scenario indices are 0-based.  Scenario mixes follow the canonical
ascending order of confusing arms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import GAUSSIAN, LINEAR, UNSTRUCTURED, BanditInstance, validate_instance


@dataclass(frozen=True)
class StoredOptimum:
    """A known equilibrium: allocation, scenario mix, and game value.

    ``kkt_tol`` reflects the precision the constants are stored at (exact
    closed forms vs. four printed decimals).
    """

    p_star: np.ndarray
    mu_star: np.ndarray
    F_star: float
    kkt_tol: float


def _case1():
    # Three arms in the plane; the best arm optimally receives zero mass.
    inst = BanditInstance(
        kind=LINEAR,
        theta=[1.0, 0.0],
        features=[[1.0, 0.0], [0.0, 1.0], [-2.0, 0.0]],
        variances=[1.0, 1.0, 1.0],
    )
    opt = StoredOptimum(
        p_star=np.array([0.0, 2.0 / 3.0, 1.0 / 3.0]),
        mu_star=np.array([1.0, 0.0]),
        F_star=2.0 / 9.0,
        kkt_tol=1e-6,
    )
    return inst, opt


def _case2():
    # Six-arm, three-dimensional instance with constants stored at four
    # decimals; tolerances downstream account for the printing precision.
    inst = BanditInstance(
        kind=LINEAR,
        theta=[1.9492, -0.4601, -0.4279],
        features=[
            [-0.7322, -0.7272, -0.0976],
            [-0.9580, -0.2982, 0.8227],
            [-0.0585, -0.8511, 0.1397],
            [0.2705, -0.8211, 0.1124],
            [0.5793, -0.5567, -0.1627],
            [-0.5004, -0.4163, 0.6065],
        ],
        variances=[1.0] * 6,
    )
    opt = StoredOptimum(
        p_star=np.array([0.3122, 0.3856, 0.0, 0.3022, 0.0, 0.0]),
        mu_star=np.array([0.5149, 0.0, 0.0, 0.4851, 0.0]),
        F_star=0.5037,
        kkt_tol=1e-3,
    )
    return inst, opt


def _example2():
    # Continuum of optima p = (z, 1/2, 1/2 - z); a representative is stored.
    inst = BanditInstance(
        kind=LINEAR,
        theta=[1.0, 0.0],
        features=[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]],
        variances=[1.0, 1.0, 1.0],
    )
    opt = StoredOptimum(
        p_star=np.array([0.25, 0.5, 0.25]),
        mu_star=np.array([1.0, 0.0]),
        F_star=0.125,
        kkt_tol=1e-6,
    )
    return inst, opt


def _example3():
    # Bilinear payoff F = (mu_1 p_1 + mu_2 p_2) / 2.
    inst = BanditInstance(
        kind=LINEAR,
        theta=[1.0, 1.0],
        features=[[-1.0, 0.0], [0.0, -1.0], [0.0, 0.0]],
        variances=[1.0, 1.0, 1.0],
    )
    opt = StoredOptimum(
        p_star=np.array([0.5, 0.5, 0.0]),
        mu_star=np.array([0.5, 0.5]),
        F_star=0.25,
        kkt_tol=1e-6,
    )
    return inst, opt


def _bai_fwfail():
    # Unstructured Gaussian triple where vanilla Frank-Wolfe stalls at the
    # uniform allocation; the saddle allocation is irrational.
    inst = BanditInstance(
        kind=UNSTRUCTURED,
        theta=[1.0, 0.0, 0.0],
        family=GAUSSIAN,
        variances=[1.0, 1.0, 1.0],
    )
    r2 = math.sqrt(2.0)
    opt = StoredOptimum(
        p_star=np.array([r2 - 1.0, 1.0 - r2 / 2.0, 1.0 - r2 / 2.0]),
        mu_star=np.array([0.5, 0.5]),
        F_star=1.5 - r2,
        kkt_tol=1e-6,
    )
    return inst, opt


_BUILTINS = {
    "case1": _case1,
    "case2": _case2,
    "example2": _example2,
    "example3": _example3,
    "bai-fwfail": _bai_fwfail,
}

BUILTIN_NAMES = tuple(sorted(_BUILTINS))


def builtin_instance(name: str) -> BanditInstance:
    inst, _ = builtin_with_optimum(name)
    return inst


def builtin_optimum(name: str) -> StoredOptimum:
    _, opt = builtin_with_optimum(name)
    return opt


def builtin_with_optimum(name: str) -> tuple[BanditInstance, StoredOptimum]:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ConfigError(
            f"unknown builtin instance {name!r}; available: {', '.join(BUILTIN_NAMES)}"
        ) from None
    inst, opt = factory()
    validate_instance(inst)
    return inst, opt
