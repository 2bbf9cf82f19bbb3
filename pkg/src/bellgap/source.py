"""Source operators: triple-tensor dilations of a bipartite state.

A right-directed source operator lives on H1 (x) H2 (x) H2 and reproduces
the state when either copy of H2 is traced out; a left-directed one lives on
H1 (x) H1 (x) H2 and reproduces the state when either copy of H1 is traced
out. Positivity on product vectors ("tensor positivity") is what makes the
derived three-outcome tables genuine probability measures.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import ContractError, DimensionError, NumericError, ParseError
from .lhv import TripartiteMeasure, condition21_value
from .quantum import (DensityOperator, ObservableOp, Povm, _as_observable,
                      observable_from_povm, quantum_joint)
from .scenario import Sign

log = logging.getLogger(__name__)

MARGINAL_TOL = 1e-9
WITNESS_TOL = 1e-10
TAU_NEG_TOL = 1e-9
TAU_CHECK_TOL = 1e-10
EXTENSION_TOL = 1e-7


class Direction(enum.Enum):
    RIGHT = "right"
    LEFT = "left"

    @classmethod
    def parse(cls, value: "Direction | str") -> "Direction":
        if isinstance(value, cls):
            return value
        aliases = {"right": cls.RIGHT, "▶": cls.RIGHT, "left": cls.LEFT, "◀": cls.LEFT}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ContractError(f"direction must be 'right' or 'left', got {value!r}") from None


@dataclass(frozen=True)
class SourceOperator:
    matrix: np.ndarray
    dims: tuple[int, int, int]
    direction: Direction = Direction.RIGHT

    def __post_init__(self):
        m = la.as_matrix(self.matrix)
        dims = la.check_shape(self.dims, m.shape[0])
        if len(dims) != 3:
            raise DimensionError("a source operator needs exactly three factors")
        direction = Direction.parse(self.direction)
        if direction is Direction.RIGHT and dims[1] != dims[2]:
            raise DimensionError(f"right-directed source needs dims (d1, d2, d2), got {dims}")
        if direction is Direction.LEFT and dims[0] != dims[1]:
            raise DimensionError(f"left-directed source needs dims (d1, d1, d2), got {dims}")
        m = la.hermitize(m)
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-10:
            raise ContractError(f"source operator has trace {tr!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "direction", direction)

    def to_json(self) -> dict:
        return {"matrix": la.matrix_to_json(self.matrix), "dims": list(self.dims),
                "direction": self.direction.value}

    @classmethod
    def from_json(cls, data: dict) -> "SourceOperator":
        try:
            return cls(la.matrix_from_json(data["matrix"]), tuple(data["dims"]),
                       data.get("direction", "right"))
        except KeyError as exc:
            raise ParseError(f"source operator JSON lacks field {exc}") from None


def _state_traces(t: SourceOperator) -> tuple[int, int]:
    return (2, 3) if t.direction is Direction.RIGHT else (1, 2)


def source_residual(t: SourceOperator, rho: DensityOperator) -> float:
    """Largest entrywise deviation of the two designated partial traces from ``rho``."""
    d1, d2 = rho.dims
    expected = (d1, d2, d2) if t.direction is Direction.RIGHT else (d1, d1, d2)
    if t.dims != expected:
        raise DimensionError(f"source dims {t.dims} incompatible with state dims {rho.dims}")
    return max(float(np.max(np.abs(la.partial_trace(t.matrix, t.dims, k) - rho.matrix)))
               for k in _state_traces(t))


def verify_source(t: SourceOperator, rho: DensityOperator, tol: float = MARGINAL_TOL) -> bool:
    return source_residual(t, rho) <= tol


def mirror_source(t: SourceOperator) -> SourceOperator:
    """Turn a left-directed source for rho into a right-directed one for the factor-swapped state."""
    if t.direction is not Direction.LEFT:
        raise ContractError("mirror_source expects a left-directed operator")
    d1, _, d2 = t.dims
    m = la.permute_factors(t.matrix, t.dims, [2, 0, 1])
    return SourceOperator(m, (d2, d1, d1), Direction.RIGHT)


def swapped_state(rho: DensityOperator) -> DensityOperator:
    d1, d2 = rho.dims
    return DensityOperator(la.permute_factors(rho.matrix, rho.dims, [1, 0]), (d2, d1))


@dataclass(frozen=True)
class PositivityVerdict:
    status: str  # "WitnessFound" or "NoViolationFound"
    min_value: float
    witness: tuple[np.ndarray, ...] | None = None
    restart: int = 0
    restarts: int = 0

    @property
    def found_witness(self) -> bool:
        return self.status == "WitnessFound"


def _effective_subscripts(n: int, j: int) -> str:
    rows = "abcdefgh"[:n]
    cols = "ABCDEFGH"[:n]
    terms = [rows + cols]
    for i in range(n):
        if i != j:
            terms += ["z" + rows[i], "z" + cols[i]]
    return ",".join(terms) + "->z" + rows[j] + cols[j]


def product_expectation(z: np.ndarray, dims: Sequence[int], vectors: Sequence[np.ndarray]) -> np.ndarray:
    """<psi_1 (x) ... | Z | psi_1 (x) ...> for a batch of product vectors (shape (R, d_i) each)."""
    n = len(dims)
    t = z.reshape(tuple(dims) * 2)
    rows = "abcdefgh"[:n]
    cols = "ABCDEFGH"[:n]
    terms = [rows + cols]
    ops = [t]
    for i, v in enumerate(vectors):
        terms += ["z" + rows[i], "z" + cols[i]]
        ops += [np.conj(v), v]
    return np.einsum(",".join(terms) + "->z", *ops, optimize=True).real


def tensor_positivity(z, dims: Sequence[int], restarts: int = 64, iters: int = 200,
                      seed: int = 0, tol: float = WITNESS_TOL) -> PositivityVerdict:
    """Search for a product vector with negative expectation.

    Alternating minimization: all factors but one are held fixed and the
    free factor becomes the lowest eigenvector of the contracted operator.
    Restarts run as one batch with independent seeded starting points. A
    witness is conclusive; its absence is not a proof of tensor positivity.
    """
    z = la.hermitize(la.as_matrix(z))
    dims = la.check_shape(dims, z.shape[0])
    n = len(dims)
    if restarts < 1:
        raise ContractError("need at least one restart")
    seqs = np.random.SeedSequence(seed).spawn(restarts)
    vecs = [np.empty((restarts, d), dtype=np.complex128) for d in dims]
    for r, ss in enumerate(seqs):
        rng = np.random.default_rng(ss)
        for i, d in enumerate(dims):
            v = rng.normal(size=d) + 1j * rng.normal(size=d)
            vecs[i][r] = v / np.linalg.norm(v)
    t = z.reshape(dims * 2)
    subs = [_effective_subscripts(n, j) for j in range(n)]
    value = product_expectation(z, dims, vecs)
    for _ in range(iters):
        before = value
        for j in range(n):
            ops = [t]
            for i in range(n):
                if i != j:
                    ops += [np.conj(vecs[i]), vecs[i]]
            eff = np.einsum(subs[j], *ops, optimize=True)
            w, v = la.hermitian_eig(la.dagger(eff) * 0.5 + eff * 0.5)
            vecs[j] = v[..., :, -1]
            value = w[..., -1]
        if np.all(np.abs(before - value) <= 1e-15 * max(1.0, float(np.max(np.abs(value))))):
            break
    value = product_expectation(z, dims, vecs)
    best = int(np.argmin(value))
    min_value = float(value[best])
    if min_value < -tol:
        witness = tuple(v[best].copy() for v in vecs)
        return PositivityVerdict("WitnessFound", min_value, witness, best, restarts)
    return PositivityVerdict("NoViolationFound", min_value, None, best, restarts)


def sigma_of(r: SourceOperator) -> np.ndarray:
    """Reduced operator on H2 (x) H2 obtained by tracing out the first factor."""
    if r.direction is not Direction.RIGHT:
        raise ContractError("sigma_of is defined for right-directed source operators")
    return la.partial_trace(r.matrix, r.dims, 1)


def condition32(r: SourceOperator, rho: DensityOperator, a2, b2, sign: Sign | str = Sign.MINUS,
                b1=None) -> float:
    """tr[sigma_R (B1 (x) B2)] -/+ tr[rho (A2 (x) B2)].

    ``b1`` defaults to ``a2``, the case where Alice's second setting and
    Bob's first setting measure the same observable.
    """
    sign = Sign.parse(sign)
    if r.direction is not Direction.RIGHT:
        raise ContractError("condition32 is stated for right-directed source operators; mirror first")
    if not verify_source(r, rho):
        raise ContractError("operator is not a source operator for the given state")
    a2 = _as_observable(a2).matrix
    b2 = _as_observable(b2).matrix
    b1 = a2 if b1 is None else _as_observable(b1).matrix
    sigma = sigma_of(r)
    first = np.trace(sigma @ la.kron(b1, b2))
    second = np.trace(rho.matrix @ la.kron(a2, b2))
    value = first + sign.factor * second
    if abs(value.imag) > 1e-9:
        raise NumericError("condition value has an imaginary part")
    return float(value.real)


def property39_residual(r: SourceOperator, rho: DensityOperator) -> float:
    d1, d2 = rho.dims
    if d1 != d2 or r.dims != (d1, d1, d1):
        raise DimensionError(f"need equal factor dimensions, got source {r.dims} and state {rho.dims}")
    return max(float(np.max(np.abs(la.partial_trace(r.matrix, r.dims, k) - rho.matrix))) for k in (1, 2, 3))


def property39_check(r: SourceOperator, rho: DensityOperator, tol: float = MARGINAL_TOL) -> bool:
    """True iff every single-factor partial trace of ``r`` equals ``rho``."""
    return property39_residual(r, rho) <= tol


# positive extension search

SUPPORT_TOL = 1e-9


class _MarginalSet:
    """Affine set {X : tr^(k)(W X W^dagger) = rho, k = 1, 2, 3}; W is an isometry or None (identity)."""

    def __init__(self, d: int, w: np.ndarray | None = None):
        self.d = d
        self.dims = (d, d, d)
        self.w = w
        self.size = d ** 3 if w is None else w.shape[1]
        self._cached_pinv = None

    @property
    def pinv(self) -> np.ndarray:
        if self._cached_pinv is None:
            self._cached_pinv = _gram_pinv(self.d) if self.w is None else self.gram_pinv()
        return self._cached_pinv

    def full(self, x: np.ndarray) -> np.ndarray:
        return x if self.w is None else self.w @ x @ la.dagger(self.w)

    def apply(self, x: np.ndarray) -> np.ndarray:
        r = self.full(x)
        return np.concatenate([la.partial_trace(r, self.dims, k).ravel() for k in (1, 2, 3)])

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        m = self.d ** 4
        r = sum(la.lift(y[i * m:(i + 1) * m].reshape(self.d ** 2, self.d ** 2), self.dims, i + 1)
                for i in range(3))
        return r if self.w is None else la.dagger(self.w) @ r @ self.w

    def gram_pinv(self) -> np.ndarray:
        """Pseudo-inverse of L L^dagger for the constraint map L."""
        n = 3 * self.d ** 4
        gram = np.empty((n, n), dtype=np.complex128)
        for col in range(n):
            y = np.zeros(n, dtype=np.complex128)
            y[col] = 1.0
            gram[:, col] = self.apply(self.adjoint(y))
        pinv = np.linalg.pinv(gram, rcond=1e-10, hermitian=True)
        pinv.setflags(write=False)
        return pinv

    def project(self, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
        resid = self.apply(x) - np.tile(rho.ravel(), 3)
        return x - self.adjoint(self.pinv @ resid)

    def residual(self, x: np.ndarray, rho: np.ndarray) -> float:
        return float(np.max(np.abs(self.apply(x) - np.tile(rho.ravel(), 3))))


@lru_cache(maxsize=4)
def _gram_pinv(d: int) -> np.ndarray:
    return _MarginalSet(d).gram_pinv()


def marginal_projection(r: np.ndarray, rho: np.ndarray, d: int) -> np.ndarray:
    """Orthogonal (Frobenius) projection onto {R : tr^(k) R = rho, k = 1, 2, 3}."""
    return _MarginalSet(d).project(r, rho)


def extension_support(rho: np.ndarray, d: int) -> np.ndarray:
    """Isometry onto the largest subspace that can carry a PSD extension of ``rho``.

    A PSD operator whose pair marginal is ``rho`` has its range inside
    supp(rho) (x) H for that pair; intersecting the three such subspaces
    loses no PSD extension and removes the flat directions that make
    feasibility iterations crawl.
    """
    w, v = la.hermitian_eig(rho)
    keep = v[:, w > SUPPORT_TOL * max(float(w[0]), 1e-300)]
    p = keep @ la.dagger(keep)
    dims = (d, d, d)
    eye = np.eye(d ** 3)
    outside = sum(eye - la.permute_factors(la.kron(p, np.eye(d)), dims, perm)
                  for perm in ([0, 1, 2], [0, 2, 1], [2, 0, 1]))
    w, v = la.hermitian_eig(outside)
    return np.ascontiguousarray(v[:, w < 1e-8])


@dataclass(frozen=True)
class ExtensionResult:
    found: bool
    r: SourceOperator | None
    marginal_residual: float
    iterations: int
    support_dim: int


def _douglas_rachford(aff: _MarginalSet, rho: np.ndarray, iters: int, tol: float):
    """Feasibility iteration between the PSD cone and ``aff``.

    Returns (unit-trace PSD iterate or None, best marginal residual, iterations used).
    """
    z = aff.project(np.eye(aff.size, dtype=np.complex128) / aff.size, rho)
    guess = None
    best = np.inf
    for it in range(1, iters + 1):
        x = aff.project(z, rho)
        refl = 2.0 * x - z
        w, v = la.hermitian_eig(0.5 * (refl + la.dagger(refl)), guess=guess)
        guess = v
        y = (v * np.clip(w, 0.0, None)) @ la.dagger(v)
        tr = np.trace(y).real
        res = aff.residual(y / tr, rho) if tr > 0 else np.inf
        best = min(best, res)
        if res < tol:
            return y / tr, res, it
        z = z + y - x
    return None, best, iters


def find_positive_extension(rho: DensityOperator, iters: int = 500,
                            tol: float = EXTENSION_TOL) -> ExtensionResult:
    """Look for a PSD operator on H (x) H (x) H whose three pair marginals all equal ``rho``.

    The search space is first cut down to the operators supported where
    every pair marginal can live, then a Douglas-Rachford iteration
    alternates between the PSD cone and the affine marginal set. Success
    yields an exactly PSD, unit-trace candidate; failure does not prove
    that no extension exists.
    """
    d1, d2 = rho.dims
    if d1 != d2:
        raise DimensionError("extension search needs equal factor dimensions")
    if d1 > 4:
        raise ContractError("extension search is limited to d <= 4")
    d = d1
    w = extension_support(rho.matrix, d)
    k = w.shape[1]
    if k == 0:
        return ExtensionResult(False, None, float(np.max(np.abs(rho.matrix))), 0, 0)
    aff = _MarginalSet(d, None if k == d ** 3 else w)
    y, res, used = _douglas_rachford(aff, rho.matrix, iters, tol)
    if y is None:
        log.debug("no positive extension after %d iterations (residual %.3g)", used, res)
        return ExtensionResult(False, None, res, used, k)
    full = aff.full(y)
    res = _MarginalSet(d).residual(full, rho.matrix)
    return ExtensionResult(res < tol, SourceOperator(full, (d, d, d), Direction.RIGHT), res, used, k)


# three-outcome measures built from a source operator

@dataclass(frozen=True)
class TauReport:
    tau1: TripartiteMeasure
    tau2: TripartiteMeasure
    marginals_ok: bool
    compatible: bool
    a5_residual: float
    condition21: float
    condition32: float
    tensor_positive: bool
    marginal_error: float = 0.0
    compatibility_error: float = 0.0


def _tau(r: SourceOperator, ma: Povm, mb1: Povm, mb2: Povm) -> TripartiteMeasure:
    d1, d2, _ = r.dims
    t = r.matrix.reshape(d1, d2, d2, d1, d2, d2)
    p = np.einsum("abcABC,xAa,yBb,zCc->xyz", t, ma.effects, mb1.effects, mb2.effects, optimize=True)
    if np.max(np.abs(p.imag)) > 1e-9:
        raise NumericError("tau has imaginary entries")
    p = p.real
    if np.min(p) < -TAU_NEG_TOL:
        raise NumericError(f"tau has a negative entry {np.min(p):.3g}: the source operator is not tensor-positive")
    p = np.clip(p, 0.0, None)
    return TripartiteMeasure((ma.grid, mb1.grid, mb2.grid), p / p.sum())


def tau_pipeline(r: SourceOperator, rho: DensityOperator, povms: Sequence[Povm],
                 sign: Sign | str = Sign.MINUS, positivity_restarts: int = 16,
                 seed: int = 0) -> TauReport:
    """Build the two three-outcome measures from a source operator and check them.

    ``povms`` are (Alice a1, Alice a2, Bob b1, Bob b2).
    """
    sign = Sign.parse(sign)
    if r.direction is not Direction.RIGHT:
        raise ContractError("tau_pipeline is stated for right-directed operators; use mirror_source")
    if not verify_source(r, rho):
        raise ContractError("operator is not a source operator for the given state")
    ma1, ma2, mb1, mb2 = povms
    tensor_positive = la.is_psd(r.matrix)
    if not tensor_positive:
        verdict = tensor_positivity(r.matrix, r.dims, restarts=positivity_restarts, seed=seed)
        tensor_positive = not verdict.found_witness
        if not tensor_positive:
            warnings.warn("source operator is not tensor-positive; tau need not be a measure",
                          RuntimeWarning, stacklevel=2)
    tau1 = _tau(r, ma1, mb1, mb2)
    tau2 = _tau(r, ma2, mb1, mb2)
    marg_err = 0.0
    for tau, ma in ((tau1, ma1), (tau2, ma2)):
        marg_err = max(marg_err,
                       float(np.max(np.abs(tau.probs.sum(axis=2) - quantum_joint(rho, ma, mb1).probs))),
                       float(np.max(np.abs(tau.probs.sum(axis=1) - quantum_joint(rho, ma, mb2).probs))))
    comp_err = float(np.max(np.abs(tau1.probs.sum(axis=0) - tau2.probs.sum(axis=0))))
    c21 = condition21_value(tau2, sign)
    c32 = condition32(r, rho, observable_from_povm(ma2), observable_from_povm(mb2), sign,
                      b1=observable_from_povm(mb1))
    return TauReport(tau1, tau2, marg_err <= TAU_CHECK_TOL, comp_err <= TAU_CHECK_TOL,
                     abs(c21 - c32), c21, c32, tensor_positive, marg_err, comp_err)


# constructions used by tests and the CLI

def symmetrize(x: np.ndarray, d: int, n: int = 3) -> np.ndarray:
    """Average of ``x`` over all permutations of its ``n`` identical factors."""
    dims = (d,) * n
    perms = list(permutations(range(n)))
    return sum(la.permute_factors(x, dims, p) for p in perms) / len(perms)


def random_symmetric_state(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    """Permutation-symmetric density operator on (C^d)^(x3)."""
    n = d ** 3
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    x = symmetrize(g @ la.dagger(g), d)
    return x / np.trace(x).real


def product_source(phi: np.ndarray) -> SourceOperator:
    """|phi><phi| on each of three factors."""
    p = np.outer(phi, np.conj(phi))
    p = p / np.trace(p).real
    d = p.shape[0]
    return SourceOperator(la.kron_all(p, p, p), (d, d, d))
