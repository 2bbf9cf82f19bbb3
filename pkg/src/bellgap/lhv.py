"""Finite local hidden variable (LHV) models and the sufficient condition for the original Bell inequality.

Two model kinds are supported:

* :class:`CorrelationLhvModel` reproduces correlation functions through
  response functions ``f1[i](omega)``, ``f2[k](omega)`` with values in [-1, 1].
* :class:`ConditionalLhvModel` reproduces whole joint distributions through
  per-omega conditional outcome distributions.

Settings are numbered 1 and 2 in the public API. Hidden-variable spaces are
finite, so every integral against ``nu`` is an exact finite sum, and
"nu-almost everywhere" means "for every omega with nu(omega) > 0".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, NumericError, ParseError
from .scenario import (DICHOTOMIC, CorrelationQuad, JointDistribution, Sign,
                       bell_slack, outcome_grid)

NORM_TOL = 1e-12
CONDITION_TOL = 1e-12
MAX_OMEGA = 64


def _probability_vector(nu, name: str = "nu") -> np.ndarray:
    nu = np.array(nu, dtype=float)
    if nu.ndim != 1 or nu.size == 0:
        raise ContractError(f"{name} must be a non-empty vector")
    if np.any(nu < 0.0):
        raise ContractError(f"{name} has negative entries")
    if abs(nu.sum() - 1.0) > NORM_TOL:
        raise ContractError(f"{name} sums to {nu.sum()!r}, not 1")
    return nu


def _setting(i: int) -> int:
    if i not in (1, 2):
        raise ContractError(f"setting index must be 1 or 2, got {i}")
    return i - 1


@dataclass(frozen=True)
class CorrelationLhvModel:
    """``nu`` over Omega; ``f1[i]``, ``f2[k]`` are response functions, shape (2, |Omega|)."""

    nu: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    def __post_init__(self):
        nu = _probability_vector(self.nu)
        if nu.size > MAX_OMEGA:
            raise ContractError(f"|Omega| = {nu.size} exceeds the cap {MAX_OMEGA}")
        f1 = np.array(self.f1, dtype=float)
        f2 = np.array(self.f2, dtype=float)
        for name, f in (("f1", f1), ("f2", f2)):
            if f.shape != (2, nu.size):
                raise ContractError(f"{name} must have shape (2, {nu.size}), got {f.shape}")
            if np.any(np.abs(f) > 1.0):
                raise ContractError(f"{name} has values outside [-1, 1]")
        for arr in (nu, f1, f2):
            arr.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "f2", f2)

    @property
    def omega_size(self) -> int:
        return self.nu.size

    def to_json(self) -> dict:
        return {"nu": self.nu.tolist(), "f1": self.f1.tolist(), "f2": self.f2.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "CorrelationLhvModel":
        try:
            return cls(data["nu"], data["f1"], data["f2"])
        except KeyError as exc:
            raise ParseError(f"LHV model JSON lacks field {exc}") from None


def lhv_moment(m: CorrelationLhvModel, i: int, k: int, powers: tuple[int, int] = (1, 1)) -> float:
    p, q = powers
    if p < 0 or q < 0 or p + q > 2:
        raise ContractError(f"moment powers {powers} must be non-negative with sum <= 2")
    a = m.f1[_setting(i)]
    b = m.f2[_setting(k)]
    return float(np.sum(a ** p * b ** q * m.nu))


def correlation_quad(m: CorrelationLhvModel) -> CorrelationQuad:
    return CorrelationQuad(c11=lhv_moment(m, 1, 1), c12=lhv_moment(m, 1, 2),
                           c22=lhv_moment(m, 2, 2), c21=lhv_moment(m, 2, 1))


def condition8_value(m: CorrelationLhvModel, sign: Sign | str = Sign.MINUS) -> float:
    """Integral of f2[b2] * (f2[b1] -/+ f1[a2]) against nu."""
    sign = Sign.parse(sign)
    f2_1, f2_2 = m.f2
    f1_2 = m.f1[1]
    return float(np.sum(f2_2 * (f2_1 + sign.factor * f1_2) * m.nu))


@dataclass(frozen=True)
class Theorem1Check:
    condition8: float
    slack: float
    consistent: bool


def theorem1_check(m: CorrelationLhvModel, sign: Sign | str = Sign.MINUS) -> Theorem1Check:
    """Evaluate the sufficient condition and the Bell slack together.

    ``consistent`` is false only if the condition holds while the
    inequality fails, which the theorem rules out.
    """
    sign = Sign.parse(sign)
    c8 = condition8_value(m, sign)
    slack = bell_slack(correlation_quad(m), sign)
    consistent = not (c8 >= -CONDITION_TOL and slack < -CONDITION_TOL)
    return Theorem1Check(c8, slack, consistent)


def pointwise_eq12_check(m: CorrelationLhvModel, sign: Sign | str = Sign.MINUS,
                         tol: float = NORM_TOL) -> bool:
    """True iff f1[a2] = +/- f2[b1] at every omega carrying positive weight."""
    sign = Sign.parse(sign)
    support = m.nu > 0.0
    target = -sign.factor * m.f2[0]  # minus sign -> f1[a2] == f2[b1]
    return bool(np.all(np.abs(m.f1[1] - target)[support] <= tol))


def second_moment_gap(m: CorrelationLhvModel, sign: Sign | str = Sign.MINUS) -> float:
    """Integral of (f1[a2] -/+ f2[b1])**2 against nu."""
    sign = Sign.parse(sign)
    return float(np.sum((m.f1[1] + sign.factor * m.f2[0]) ** 2 * m.nu))


@dataclass(frozen=True)
class ConditionalLhvModel:
    """LHV model for joint distributions.

    ``p1[i, w, :]`` is Alice's outcome distribution over ``grid1`` for
    setting ``i+1`` given hidden variable ``w``; ``p2`` likewise for Bob.
    """

    nu: np.ndarray
    grid1: tuple[float, ...]
    grid2: tuple[float, ...]
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        nu = _probability_vector(self.nu)
        if nu.size > MAX_OMEGA:
            raise ContractError(f"|Omega| = {nu.size} exceeds the cap {MAX_OMEGA}")
        g1, g2 = outcome_grid(self.grid1), outcome_grid(self.grid2)
        if g1 != tuple(float(x) for x in self.grid1) or g2 != tuple(float(x) for x in self.grid2):
            raise ContractError("conditional model grids must be given sorted")
        p1 = np.array(self.p1, dtype=float)
        p2 = np.array(self.p2, dtype=float)
        support = nu > 0.0
        for name, p, g in (("p1", p1, g1), ("p2", p2, g2)):
            if p.shape != (2, nu.size, len(g)):
                raise ContractError(f"{name} must have shape (2, {nu.size}, {len(g)}), got {p.shape}")
            if np.any(p < 0.0):
                raise ContractError(f"{name} has negative entries")
            sums = p.sum(axis=-1)[:, support]
            if np.any(np.abs(sums - 1.0) > NORM_TOL):
                raise ContractError(f"{name} conditionals do not sum to 1")
        for arr in (nu, p1, p2):
            arr.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "grid1", g1)
        object.__setattr__(self, "grid2", g2)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @property
    def omega_size(self) -> int:
        return self.nu.size

    def to_json(self) -> dict:
        return {"nu": self.nu.tolist(), "grid1": list(self.grid1), "grid2": list(self.grid2),
                "p1": self.p1.tolist(), "p2": self.p2.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "ConditionalLhvModel":
        try:
            return cls(data["nu"], data["grid1"], data["grid2"], data["p1"], data["p2"])
        except KeyError as exc:
            raise ParseError(f"conditional LHV model JSON lacks field {exc}") from None


def lhv_joint(m: ConditionalLhvModel, i: int, k: int) -> JointDistribution:
    a = m.p1[_setting(i)]
    b = m.p2[_setting(k)]
    probs = np.einsum("w,wx,wy->xy", m.nu, a, b)
    return JointDistribution(m.grid1, m.grid2, probs)


def induced_correlation_model(m: ConditionalLhvModel) -> CorrelationLhvModel:
    """Response functions given by the conditional means of the outcomes."""
    f1 = m.p1 @ np.asarray(m.grid1)
    f2 = m.p2 @ np.asarray(m.grid2)
    # rounding can push a mean a hair past +/-1
    return CorrelationLhvModel(m.nu, np.clip(f1, -1.0, 1.0), np.clip(f2, -1.0, 1.0))


@dataclass(frozen=True)
class TripartiteMeasure:
    """Probability table over (lambda1', lambda2, lambda2'), i.e. Alice's a2 outcome and Bob's b1, b2 outcomes."""

    grids: tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]
    probs: np.ndarray

    def __post_init__(self):
        grids = tuple(outcome_grid(g) for g in self.grids)
        if len(grids) != 3:
            raise ContractError("a tripartite measure needs three grids")
        for g, raw in zip(grids, self.grids):
            if g != tuple(float(x) for x in raw):
                raise ContractError("tripartite measure grids must be given sorted")
        p = np.array(self.probs, dtype=float)
        if p.shape != tuple(len(g) for g in grids):
            raise ContractError(f"table shape {p.shape} does not match grids")
        if np.any(p < 0.0):
            raise ContractError("tripartite measure has negative entries")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ContractError(f"tripartite measure mass {p.sum()!r} deviates from 1")
        p.setflags(write=False)
        object.__setattr__(self, "grids", grids)
        object.__setattr__(self, "probs", p)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable outcome arrays for the three coordinates."""
        x, y, z = (np.asarray(g) for g in self.grids)
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def marginal(self, drop: int) -> JointDistribution:
        """Joint distribution of the two coordinates left after summing out axis ``drop`` (0-based)."""
        keep = [ax for ax in range(3) if ax != drop]
        return JointDistribution(self.grids[keep[0]], self.grids[keep[1]], self.probs.sum(axis=drop))

    def event(self, predicate) -> float:
        x, y, z = self.axes()
        mask = np.broadcast_to(predicate(x, y, z), self.probs.shape)
        return float(np.sum(self.probs[mask]))

    def to_json(self) -> dict:
        return {"grids": [list(g) for g in self.grids], "probs": self.probs.tolist()}


def induced_mu(m: ConditionalLhvModel) -> TripartiteMeasure:
    """Mixture over omega of P1^(a2) x P2^(b1) x P2^(b2)."""
    probs = np.einsum("w,wx,wy,wz->xyz", m.nu, m.p1[1], m.p2[0], m.p2[1])
    return TripartiteMeasure((m.grid1, m.grid2, m.grid2), probs)


def condition21_value(mu: TripartiteMeasure, sign: Sign | str = Sign.MINUS) -> float:
    """Integral of lambda2' * (lambda2 -/+ lambda1') against ``mu``."""
    sign = Sign.parse(sign)
    x, y, z = mu.axes()
    return float(np.sum(z * (y + sign.factor * x) * mu.probs))


def _require_dichotomic(mu: TripartiteMeasure) -> None:
    if any(g != DICHOTOMIC for g in mu.grids):
        raise ContractError("dichotomic bounds need all three grids equal to {-1, +1}")


def cv_expression(mu: TripartiteMeasure) -> float:
    """2 mu(l1' l2 = -1) - 4 mu(l1' l2 = -1, l1' l2' = 1) on dichotomic grids."""
    _require_dichotomic(mu)
    anti = mu.event(lambda x, y, z: x * y == -1.0)
    both = mu.event(lambda x, y, z: (x * y == -1.0) & (x * z == 1.0))
    return 2.0 * anti - 4.0 * both


@dataclass(frozen=True)
class MuBounds:
    lhs: float
    bound_w: float
    bound_www: float


def dichotomic_mu_bounds(mu: TripartiteMeasure) -> MuBounds:
    """Minus-sign condition value and its two probability lower bounds."""
    _require_dichotomic(mu)
    lhs = condition21_value(mu, Sign.MINUS)
    anti = mu.event(lambda x, y, z: x * y == -1.0)
    agree = mu.event(lambda x, y, z: x * z == 1.0)
    bound_w = 2.0 * anti - 4.0 * agree
    bound_www = 2.0 * np.sqrt(anti) * (np.sqrt(anti) - 2.0 * np.sqrt(agree))
    if lhs < bound_w - CONDITION_TOL or lhs < bound_www - CONDITION_TOL:
        raise NumericError(f"lower bounds exceed the condition value: {lhs} vs {bound_w}, {bound_www}")
    return MuBounds(lhs, float(bound_w), float(bound_www))


# random model generators for property sweeps

def random_correlation_model(rng: np.random.Generator, omega_size: int) -> CorrelationLhvModel:
    nu = rng.dirichlet(np.ones(omega_size))
    return CorrelationLhvModel(nu, rng.uniform(-1, 1, (2, omega_size)), rng.uniform(-1, 1, (2, omega_size)))


def random_dichotomic_model(rng: np.random.Generator, omega_size: int, sign: Sign | str) -> CorrelationLhvModel:
    """Model whose (a2, b1) correlation is exactly +1 (minus) or -1 (plus)."""
    sign = Sign.parse(sign)
    nu = rng.dirichlet(np.ones(omega_size))
    f1 = rng.uniform(-1, 1, (2, omega_size))
    f2 = rng.uniform(-1, 1, (2, omega_size))
    f2[0] = rng.choice([-1.0, 1.0], omega_size)
    f1[1] = -sign.factor * f2[0]
    return CorrelationLhvModel(nu, f1, f2)


def _random_conditionals(rng: np.random.Generator, omega_size: int, n: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n), size=(2, omega_size))


def random_conditional_model(rng: np.random.Generator, omega_size: int,
                             grid1: Sequence[float] = DICHOTOMIC,
                             grid2: Sequence[float] = DICHOTOMIC) -> ConditionalLhvModel:
    g1, g2 = outcome_grid(grid1), outcome_grid(grid2)
    return ConditionalLhvModel(rng.dirichlet(np.ones(omega_size)), g1, g2,
                               _random_conditionals(rng, omega_size, len(g1)),
                               _random_conditionals(rng, omega_size, len(g2)))


def perfectly_correlated_model(rng: np.random.Generator, omega_size: int, grid: Sequence[float],
                               sign: Sign | str = Sign.MINUS, null_points: int = 1) -> ConditionalLhvModel:
    """Conditional model with P^(a2,b1)(l1 = +/- l2) = 1.

    Perfect (anti)correlation forces the a2 and b1 conditionals to be point
    masses at matching values on the support of nu. The last ``null_points``
    hidden variables get zero weight and arbitrary conditionals.
    """
    sign = Sign.parse(sign)
    g = outcome_grid(grid)
    if sign is Sign.PLUS and g != tuple(sorted(-x for x in g)):
        raise ContractError("anticorrelated construction needs a grid symmetric about 0")
    n = len(g)
    live = omega_size - null_points
    if live < 1:
        raise ContractError("need at least one hidden variable with positive weight")
    nu = np.concatenate([rng.dirichlet(np.ones(live)), np.zeros(null_points)])
    p1 = _random_conditionals(rng, omega_size, n)
    p2 = _random_conditionals(rng, omega_size, n)
    idx = rng.integers(0, n, live)
    partner = idx if sign is Sign.MINUS else (n - 1 - idx)
    p1[1, :live] = 0.0
    p2[0, :live] = 0.0
    p1[1, np.arange(live), idx] = 1.0
    p2[0, np.arange(live), partner] = 1.0
    return ConditionalLhvModel(nu, g, g, p1, p2)


def random_dichotomic_measure(rng: np.random.Generator) -> TripartiteMeasure:
    return TripartiteMeasure((DICHOTOMIC,) * 3, rng.dirichlet(np.ones(8)).reshape(2, 2, 2))
