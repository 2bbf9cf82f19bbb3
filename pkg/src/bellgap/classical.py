"""EPR-local classical correlation scenarios.

A classical state is a distribution ``pi`` over a finite set of system
variables theta. A measurement assigns each theta an outcome distribution
(a deterministic one for ideal measurements); its classical observable is
the conditional mean outcome.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, NumericError, ParseError
from .lhv import ConditionalLhvModel
from .scenario import JointDistribution, outcome_grid

NORM_TOL = 1e-12
MAX_THETA = 256


@dataclass(frozen=True)
class ClassicalState:
    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        if pi.ndim != 1 or pi.size == 0 or pi.size > MAX_THETA:
            raise ContractError(f"classical state needs 1..{MAX_THETA} points, got shape {pi.shape}")
        if np.any(pi < 0.0) or abs(pi.sum() - 1.0) > NORM_TOL:
            raise ContractError("classical state is not a probability vector")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @property
    def theta_size(self) -> int:
        return self.pi.size


@dataclass(frozen=True)
class ClassicalObservable:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or np.any(np.abs(v) > 1.0):
            raise ContractError("classical observable must map theta into [-1, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ClassicalMeasurement:
    """``cond[theta, j]`` is the probability of outcome ``grid[j]`` given theta."""

    grid: tuple[float, ...]
    cond: np.ndarray

    def __post_init__(self):
        grid = outcome_grid(self.grid)
        if grid != tuple(float(x) for x in self.grid):
            raise ContractError("measurement grid must be given sorted")
        cond = np.array(self.cond, dtype=float)
        if cond.ndim != 2 or cond.shape[1] != len(grid):
            raise ContractError(f"conditional table shape {cond.shape} does not match the grid")
        if np.any(cond < 0.0) or np.any(np.abs(cond.sum(axis=1) - 1.0) > NORM_TOL):
            raise ContractError("conditional outcome distributions are not normalized")
        cond.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cond", cond)

    @property
    def theta_size(self) -> int:
        return self.cond.shape[0]

    def to_json(self) -> dict:
        return {"grid": list(self.grid), "cond": self.cond.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "ClassicalMeasurement":
        try:
            return cls(data["grid"], data["cond"])
        except KeyError as exc:
            raise ParseError(f"measurement JSON lacks field {exc}") from None


def observable_of(m: ClassicalMeasurement) -> ClassicalObservable:
    return ClassicalObservable(np.clip(m.cond @ np.asarray(m.grid), -1.0, 1.0))


def ideal_measurement(a: ClassicalObservable) -> ClassicalMeasurement:
    """Error-free measurement: the outcome is the observable's value."""
    grid = tuple(float(x) for x in np.unique(a.values))
    cond = (a.values[:, None] == np.asarray(grid)[None, :]).astype(float)
    return ClassicalMeasurement(grid, cond)


def randomized_measurement(a: ClassicalObservable) -> ClassicalMeasurement:
    """Two-outcome measurement reporting +1 with probability (1 + a)/2; its mean is ``a``."""
    up = 0.5 * (1.0 + a.values)
    return ClassicalMeasurement((-1.0, 1.0), np.stack([1.0 - up, up], axis=1))


def bit_flip_measurement(a: ClassicalObservable, eps: float) -> ClassicalMeasurement:
    """Ideal measurement of a +/-1 valued observable whose outcome is flipped with probability ``eps``."""
    if not np.all(np.isin(a.values, (-1.0, 1.0))):
        raise ContractError("bit-flip noise needs a +/-1 valued observable")
    up = np.where(a.values > 0, 1.0 - eps, eps)
    return ClassicalMeasurement((-1.0, 1.0), np.stack([1.0 - up, up], axis=1))


def _check_theta(pi: ClassicalState, *items) -> None:
    for m in items:
        n = m.theta_size if isinstance(m, ClassicalMeasurement) else m.values.size
        if n != pi.theta_size:
            raise ContractError(f"theta size mismatch: state has {pi.theta_size}, got {n}")


def classical_joint(pi: ClassicalState, ma: ClassicalMeasurement, mb: ClassicalMeasurement) -> JointDistribution:
    _check_theta(pi, ma, mb)
    probs = np.einsum("t,tx,ty->xy", pi.pi, ma.cond, mb.cond)
    return JointDistribution(ma.grid, mb.grid, probs)


def ideal_joint(pi: ClassicalState, a: ClassicalObservable, b: ClassicalObservable) -> JointDistribution:
    """Image of ``pi`` under theta -> (A(theta), B(theta))."""
    _check_theta(pi, a, b)
    return classical_joint(pi, ideal_measurement(a), ideal_measurement(b))


def product_expectation(pi: ClassicalState, a: ClassicalObservable, b: ClassicalObservable) -> float:
    _check_theta(pi, a, b)
    return float(np.sum(a.values * b.values * pi.pi))


@dataclass(frozen=True)
class ClassicalAudit:
    c11: float
    c12: float
    c22: float
    slack: float


def classical_bell_audit(pi: ClassicalState, a1: ClassicalObservable, b1: ClassicalObservable,
                         b2: ClassicalObservable) -> ClassicalAudit:
    """Perfect-correlation Bell slack when Alice's second setting measures B1 (in average)."""
    c11 = product_expectation(pi, a1, b1)
    c12 = product_expectation(pi, a1, b2)
    c22 = product_expectation(pi, b1, b2)
    slack = (1.0 - c22) - abs(c11 - c12)
    if slack < -1e-12:
        raise NumericError(f"classical Bell slack {slack} is negative")
    return ClassicalAudit(c11, c12, c22, slack)


def _pad(m: ClassicalMeasurement, grid: Sequence[float]) -> np.ndarray:
    idx = [grid.index(x) for x in m.grid]
    out = np.zeros((m.theta_size, len(grid)))
    out[:, idx] = m.cond
    return out


def as_conditional_lhv(pi: ClassicalState, ma1: ClassicalMeasurement, ma2: ClassicalMeasurement,
                       mb1: ClassicalMeasurement, mb2: ClassicalMeasurement) -> ConditionalLhvModel:
    """The classical scenario read as an LHV model with Omega = Theta and nu = pi."""
    _check_theta(pi, ma1, ma2, mb1, mb2)
    g1 = tuple(sorted(set(ma1.grid) | set(ma2.grid)))
    g2 = tuple(sorted(set(mb1.grid) | set(mb2.grid)))
    p1 = np.stack([_pad(ma1, g1), _pad(ma2, g1)])
    p2 = np.stack([_pad(mb1, g2), _pad(mb2, g2)])
    return ConditionalLhvModel(pi.pi, g1, g2, p1, p2)


def random_state(rng: np.random.Generator, theta_size: int) -> ClassicalState:
    return ClassicalState(rng.dirichlet(np.ones(theta_size)))


def random_observable(rng: np.random.Generator, theta_size: int, dichotomic: bool = False) -> ClassicalObservable:
    if dichotomic:
        return ClassicalObservable(rng.choice([-1.0, 1.0], theta_size))
    return ClassicalObservable(rng.uniform(-1.0, 1.0, theta_size))


def random_measurement(rng: np.random.Generator, theta_size: int,
                       grid: Sequence[float] = (-1.0, -0.5, 0.0, 0.5, 1.0)) -> ClassicalMeasurement:
    return ClassicalMeasurement(outcome_grid(grid), rng.dirichlet(np.ones(len(grid)), size=theta_size))
