"""Finite joint outcome distributions and the Bell/CHSH functionals on correlations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, ParseError

MASS_TOL = 1e-9
EVENT_TOL = 1e-12


class Sign(enum.Enum):
    """Which version of the original Bell inequality is meant.

    ``MINUS`` is the "perfect correlation" version, ``PLUS`` the
    "perfect anticorrelation" one. ``factor`` is the coefficient that
    multiplies the (a2, b2) correlation, i.e. -1 for ``MINUS``.
    """

    MINUS = "minus"
    PLUS = "plus"

    @property
    def factor(self) -> float:
        return -1.0 if self is Sign.MINUS else 1.0

    @classmethod
    def parse(cls, value: "Sign | str") -> "Sign":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ContractError(f"sign must be 'minus' or 'plus', got {value!r}") from None


PerfectCorrelation = Sign.MINUS
PerfectAnticorrelation = Sign.PLUS


def outcome_grid(values: Sequence[float]) -> tuple[float, ...]:
    """Validate and canonicalize a finite outcome set in [-1, 1]."""
    vals = [float(v) for v in values]
    if not vals:
        raise ContractError("outcome grid is empty")
    if any(not math.isfinite(v) or v < -1.0 or v > 1.0 for v in vals):
        raise ContractError(f"outcome values must lie in [-1, 1]: {vals}")
    if len(set(vals)) != len(vals):
        raise ContractError(f"outcome grid has duplicates: {vals}")
    return tuple(sorted(vals))


DICHOTOMIC = (-1.0, 1.0)


@dataclass(frozen=True)
class JointDistribution:
    """Probability table over ``grid1 x grid2``; ``probs[i, j]`` is P(grid1[i], grid2[j])."""

    grid1: tuple[float, ...]
    grid2: tuple[float, ...]
    probs: np.ndarray

    def __post_init__(self):
        g1 = outcome_grid(self.grid1)
        g2 = outcome_grid(self.grid2)
        p = np.array(self.probs, dtype=float)
        if p.shape != (len(self.grid1), len(self.grid2)):
            raise ContractError(f"probability table shape {p.shape} does not match grids")
        # reorder rows/columns if the caller's grids were unsorted
        p = p[np.argsort(self.grid1, kind="stable")][:, np.argsort(self.grid2, kind="stable")]
        if np.any(p < 0.0):
            raise ContractError("joint distribution has negative entries")
        mass = p.sum()
        if abs(mass - 1.0) > MASS_TOL:
            raise ContractError(f"joint distribution mass {mass!r} deviates from 1")
        p = p / mass
        p.setflags(write=False)
        object.__setattr__(self, "grid1", g1)
        object.__setattr__(self, "grid2", g2)
        object.__setattr__(self, "probs", p)

    @property
    def values1(self) -> np.ndarray:
        return np.asarray(self.grid1)

    @property
    def values2(self) -> np.ndarray:
        return np.asarray(self.grid2)

    def marginal1(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def marginal2(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def to_json(self) -> dict:
        return {"grid1": list(self.grid1), "grid2": list(self.grid2),
                "probs": [[float(x) for x in row] for row in self.probs]}

    @classmethod
    def from_json(cls, data: dict) -> "JointDistribution":
        try:
            return cls(data["grid1"], data["grid2"], np.asarray(data["probs"], dtype=float))
        except KeyError as exc:
            raise ParseError(f"joint distribution JSON lacks field {exc}") from None

    @classmethod
    def point_mass(cls, x: float, y: float) -> "JointDistribution":
        return cls((x,), (y,), np.ones((1, 1)))


def moment(p: JointDistribution, m: int, n: int) -> float:
    """Mixed moment sum of x**m * y**n * P(x, y)."""
    x = p.values1[:, None] ** m
    y = p.values2[None, :] ** n
    return float(np.sum(x * y * p.probs))


_EVENTS = {
    "eq": lambda x, y: x == y,
    "neg": lambda x, y: x == -y,
    "prod+1": lambda x, y: x * y == 1.0,
    "prod-1": lambda x, y: x * y == -1.0,
}
_EVENT_ALIASES = {
    "l1=l2": "eq", "λ1=λ2": "eq", "same": "eq",
    "l1=-l2": "neg", "λ1=-λ2": "neg",
    "l1l2=1": "prod+1", "λ1λ2=1": "prod+1",
    "l1l2=-1": "prod-1", "λ1λ2=-1": "prod-1",
}


def event_prob(p: JointDistribution, event: str) -> float:
    """Mass of an exact-equality event: ``eq``, ``neg``, ``prod+1`` or ``prod-1``."""
    key = _EVENT_ALIASES.get(event, event)
    if key not in _EVENTS:
        raise ContractError(f"unknown event {event!r}")
    x = p.values1[:, None]
    y = p.values2[None, :]
    mask = _EVENTS[key](x, y)
    return float(np.sum(p.probs[mask]))


@dataclass(frozen=True)
class CorrelationQuad:
    """Correlations for the four setting pairs; ``c21`` may be absent."""

    c11: float
    c12: float
    c22: float
    c21: float | None = None

    def __post_init__(self):
        for name in ("c11", "c12", "c22", "c21"):
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v) or abs(v) > 1.0 + 1e-12:
                raise ContractError(f"correlation {name}={v} outside [-1, 1]")


def bell_slack(c: CorrelationQuad, sign: Sign | str = Sign.MINUS) -> float:
    """(1 -/+ c22) - |c11 - c12|; non-negative iff the original Bell inequality holds."""
    sign = Sign.parse(sign)
    for name in ("c11", "c12", "c22"):
        if getattr(c, name, None) is None:
            raise ContractError(f"bell_slack needs {name}")
    return (1.0 + sign.factor * c.c22) - abs(c.c11 - c.c12)


def chsh_value(c: CorrelationQuad) -> float:
    if c.c21 is None:
        raise ContractError("chsh_value needs all four correlations")
    return abs(c.c11 + c.c12 + c.c21 - c.c22)


@dataclass(frozen=True)
class DichotomicVerdict:
    holds: bool
    which: str  # "bound", "perfect" or "none"
    p21: float
    p22: float


def dichotomic_conditions(p21: JointDistribution, p22: JointDistribution,
                          sign: Sign | str = Sign.MINUS) -> DichotomicVerdict:
    """Experimentally testable sufficient conditions for the dichotomic case.

    For the minus sign, with q_ik = P^(a_i,b_k)(x*y = 1): the condition
    holds if q_21 + 2 q_22 <= 1 (``which="bound"``) or q_21 = 1
    (``which="perfect"``). The plus sign uses the event x*y = -1.
    """
    sign = Sign.parse(sign)
    for p in (p21, p22):
        if p.grid1 != DICHOTOMIC or p.grid2 != DICHOTOMIC:
            raise ContractError("dichotomic_conditions requires outcome grids {-1, +1}")
    event = "prod+1" if sign is Sign.MINUS else "prod-1"
    q21 = event_prob(p21, event)
    q22 = event_prob(p22, event)
    if q21 >= 1.0 - EVENT_TOL:
        return DichotomicVerdict(True, "perfect", q21, q22)
    if q21 + 2.0 * q22 <= 1.0 + EVENT_TOL:
        return DichotomicVerdict(True, "bound", q21, q22)
    return DichotomicVerdict(False, "none", q21, q22)
