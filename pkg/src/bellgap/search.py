"""Parameterized observables and multi-start searches for violations of the Bell inequality.

Throughout, Alice's second setting measures the same observable as Bob's
first one (A2 = B1), so a configuration is the triple (A1, B1, B2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import linalg as la
from .classical import ClassicalAudit, ClassicalObservable, ClassicalState, classical_bell_audit
from .errors import ContractError, DimensionError
from .quantum import (PAULIS, DensityOperator, ObservableOp, bloch_matrix, haar_unitary,
                      quantum_bell_slack)
from .scenario import Sign

SPECTRUM_TOL = 1e-9
NM_MAXITER = 200
NM_TOL = 1e-10
SEARCH_DIM_LIMIT = 4


# observable parameterizations

@dataclass(frozen=True)
class ObservableParam:
    """An observable in one of two forms.

    ``kind="bloch"`` (qubits): a0*I + a.sigma with |a0| + |a| <= 1.
    ``kind="spectral"``: U diag(spectrum) U^dagger where U is a product of
    complex Givens rotations, one angle and one phase per index pair.
    """

    kind: str
    a0: float = 0.0
    a: tuple[float, float, float] = (0.0, 0.0, 0.0)
    spectrum: tuple[float, ...] = ()
    angles: tuple[float, ...] = ()
    phases: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "bloch":
            norm = math.sqrt(sum(x * x for x in self.a))
            if len(self.a) != 3 or abs(self.a0) + norm > 1.0 + SPECTRUM_TOL:
                raise ContractError(f"Bloch parameters need |a0| + |a| <= 1, got {abs(self.a0) + norm}")
        elif self.kind == "spectral":
            d = len(self.spectrum)
            m = d * (d - 1) // 2
            if d < 2 or len(self.angles) != m or len(self.phases) != m:
                raise ContractError(f"spectral form on C^{d} needs {m} angles and {m} phases")
            if any(abs(x) > 1.0 + SPECTRUM_TOL for x in self.spectrum):
                raise ContractError("spectrum must lie in [-1, 1]")
        else:
            raise ContractError(f"unknown parameter kind {self.kind!r}")


def pair_schedule(d: int) -> tuple[tuple[int, int], ...]:
    return tuple((j, k) for j in range(d) for k in range(j + 1, d))


def givens_unitary(angles: np.ndarray, phases: np.ndarray, d: int) -> np.ndarray:
    """Product of complex Givens rotations; works on stacks (leading axes)."""
    angles = np.asarray(angles, dtype=float)
    phases = np.asarray(phases, dtype=float)
    lead = angles.shape[:-1]
    u = np.broadcast_to(np.eye(d, dtype=np.complex128), lead + (d, d)).copy()
    for idx, (j, k) in enumerate(pair_schedule(d)):
        c = np.cos(angles[..., idx])[..., None]
        s = (np.sin(angles[..., idx]) * np.exp(1j * phases[..., idx]))[..., None]
        uj = u[..., :, j].copy()
        uk = u[..., :, k]
        u[..., :, j] = c * uj + s * uk
        u[..., :, k] = -np.conj(s) * uj + c * uk
    return u


def realize(p: ObservableParam, d: int | None = None) -> ObservableOp:
    if p.kind == "bloch":
        if d not in (None, 2):
            raise DimensionError("Bloch parameters describe qubit observables")
        return ObservableOp(bloch_matrix(p.a) * 2.0 - np.eye(2) + p.a0 * np.eye(2))
    dim = len(p.spectrum)
    if d is not None and d != dim:
        raise DimensionError(f"parameters describe C^{dim}, requested C^{d}")
    u = givens_unitary(p.angles, p.phases, dim)
    return ObservableOp((u * np.asarray(p.spectrum)) @ la.dagger(u))


# unconstrained vectors used by the optimizer

def param_count(d: int, projective: bool) -> int:
    m = d * (d - 1) // 2
    if d == 2 and projective:
        return 2
    return d + 2 * m


def _observables(x: np.ndarray, d: int, projective: bool) -> np.ndarray:
    """Map unconstrained vectors (..., param_count) to observable matrices (..., d, d)."""
    if d == 2 and projective:
        theta, phi = x[..., 0], x[..., 1]
        n = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
        return np.einsum("...i,ijk->...jk", n, np.asarray(PAULIS))
    m = d * (d - 1) // 2
    spec = np.sin(x[..., :d])
    u = givens_unitary(x[..., d:d + m], x[..., d + m:], d)
    return np.einsum("...ij,...j,...kj->...ik", u, spec, np.conj(u))


def to_param(x: np.ndarray, d: int, projective: bool) -> ObservableParam:
    x = np.asarray(x, dtype=float)
    if d == 2 and projective:
        theta, phi = float(x[0]), float(x[1])
        a = (math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta))
        return ObservableParam("bloch", 0.0, a)
    m = d * (d - 1) // 2
    return ObservableParam("spectral", spectrum=tuple(np.sin(x[:d])),
                           angles=tuple(x[d:d + m]), phases=tuple(x[d + m:]))


@lru_cache(maxsize=16)
def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of d x d Hermitian matrices, shape (d*d, d, d)."""
    out = []
    for j in range(d):
        e = np.zeros((d, d), dtype=np.complex128)
        e[j, j] = 1.0
        out.append(e)
    for j, k in pair_schedule(d):
        e = np.zeros((d, d), dtype=np.complex128)
        e[j, k] = e[k, j] = 1.0 / math.sqrt(2.0)
        out.append(e)
        e = np.zeros((d, d), dtype=np.complex128)
        e[j, k] = 1j / math.sqrt(2.0)
        e[k, j] = -1j / math.sqrt(2.0)
        out.append(e)
    basis = np.array(out)
    basis.setflags(write=False)
    return basis


def coordinates(a: np.ndarray) -> np.ndarray:
    """Real coordinates tr[A G_mu] of (stacks of) Hermitian matrices."""
    d = a.shape[-1]
    return np.einsum("...ij,mji->...m", a, hermitian_basis(d)).real


def correlation_tensor(rho: DensityOperator) -> np.ndarray:
    """E[mu, nu] = tr[rho (G_mu (x) G_nu)], so that tr[rho (A (x) B)] = alpha^T E beta."""
    d1, d2 = rho.dims
    g1, g2 = hermitian_basis(d1), hermitian_basis(d2)
    return np.einsum("aibj,mba,nji->mn", rho.tensor(), g1, g2).real


class SlackObjective:
    """Vectorized Bell slack over unconstrained parameters of (A1, B1, B2), with A2 = B1."""

    def __init__(self, rho: DensityOperator, sign: Sign | str = Sign.MINUS, projective: bool = True):
        d1, d2 = rho.dims
        if d1 != d2:
            raise DimensionError("the A2 = B1 search needs equal factor dimensions")
        if d1 > SEARCH_DIM_LIMIT:
            raise DimensionError(f"searches are limited to d <= {SEARCH_DIM_LIMIT}")
        self.rho = rho
        self.d = d1
        self.sign = Sign.parse(sign)
        self.projective = projective
        self.k = param_count(d1, projective)
        self.tensor = correlation_tensor(rho)

    @property
    def size(self) -> int:
        return 3 * self.k

    def matrices(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        k = self.k
        return tuple(_observables(x[..., i * k:(i + 1) * k], self.d, self.projective) for i in range(3))

    def slack_from_coords(self, a1: np.ndarray, b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
        e = self.tensor
        c11 = np.einsum("...m,mn,...n->...", a1, e, b1)
        c12 = np.einsum("...m,mn,...n->...", a1, e, b2)
        c22 = np.einsum("...m,mn,...n->...", b1, e, b2)
        return (1.0 + self.sign.factor * c22) - np.abs(c11 - c12)

    def __call__(self, x: np.ndarray) -> np.ndarray | float:
        a1, b1, b2 = (coordinates(m) for m in self.matrices(x))
        out = self.slack_from_coords(a1, b1, b2)
        return float(out) if np.ndim(out) == 0 else out


# reports

@dataclass(frozen=True)
class SearchReport:
    best_slack: float
    argmax: tuple[np.ndarray, np.ndarray, np.ndarray]
    restarts_used: int
    seed: int
    sign: Sign = Sign.MINUS
    state: np.ndarray | None = None
    state_dims: tuple[int, int] | None = None
    description: str = ""
    components: tuple = field(default=(), repr=False)
    best_restart: int = 0

    def to_json(self) -> dict:
        out = {
            "best_slack": self.best_slack,
            "argmax": {name: la.matrix_to_json(m) for name, m in zip(("A1", "B1", "B2"), self.argmax)},
            "restarts_used": self.restarts_used,
            "best_restart": self.best_restart,
            "seed": self.seed,
            "sign": self.sign.value,
            "description": self.description,
        }
        if self.state is not None:
            out["state"] = {"matrix": la.matrix_to_json(self.state), "dims": list(self.state_dims)}
        return out

    def reevaluate(self) -> float:
        if self.state is None:
            raise ContractError("report carries no state")
        rho = DensityOperator(self.state, self.state_dims)
        return quantum_bell_slack(rho, *self.argmax, sign=self.sign)


def _seeded_starts(seed: int, restarts: int, size: int) -> np.ndarray:
    seqs = np.random.SeedSequence(seed).spawn(restarts)
    return np.array([np.random.default_rng(s).uniform(-math.pi, math.pi, size) for s in seqs])


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray  # (R, n) best vertex per restart
    fun: np.ndarray  # (R,)
    iterations: np.ndarray  # (R,)


def batched_nelder_mead(fun, x0: np.ndarray, maxiter: int = NM_MAXITER, xatol: float = NM_TOL,
                        fatol: float = NM_TOL) -> NelderMeadResult:
    """Nelder-Mead run in lockstep over independent restarts.

    ``fun`` maps an (m, n) array of points to m values. Each row of ``x0``
    seeds its own simplex (5% perturbation per coordinate, 0.00025 for zero
    coordinates) and follows the standard reflect / expand / contract /
    shrink rules with coefficients 1, 2, 1/2, 1/2. A restart stops once its
    simplex spread is below ``xatol`` and its value spread below ``fatol``;
    finished rows are carried along unchanged.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    rr, n = x0.shape
    sim = np.repeat(x0[:, None, :], n + 1, axis=1)
    for j in range(n):
        col = sim[:, j + 1, j]
        sim[:, j + 1, j] = np.where(col != 0.0, 1.05 * col, 0.00025)
    fs = fun(sim.reshape(-1, n)).reshape(rr, n + 1)
    active = np.ones(rr, dtype=bool)
    iters = np.zeros(rr, dtype=int)
    rows = np.arange(rr)
    for _ in range(maxiter):
        order = np.argsort(fs, axis=1, kind="stable")
        sim = np.take_along_axis(sim, order[:, :, None], axis=1)
        fs = np.take_along_axis(fs, order, axis=1)
        spread_x = np.max(np.abs(sim[:, 1:] - sim[:, :1]), axis=(1, 2))
        spread_f = np.max(np.abs(fs[:, 1:] - fs[:, :1]), axis=1)
        active &= ~((spread_x <= xatol) & (spread_f <= fatol))
        idx = rows[active]
        if idx.size == 0:
            break
        iters[idx] += 1
        s, f = sim[idx], fs[idx]
        centroid = s[:, :-1].mean(axis=1)
        worst = s[:, -1]
        xr = centroid + (centroid - worst)
        fr = fun(xr)
        new_x = worst.copy()
        new_f = f[:, -1].copy()
        shrink = np.zeros(idx.size, dtype=bool)

        better = fr < f[:, 0]
        if better.any():
            xe = centroid[better] + 2.0 * (centroid[better] - worst[better])
            fe = fun(xe)
            take_e = fe < fr[better]
            new_x[better] = np.where(take_e[:, None], xe, xr[better])
            new_f[better] = np.where(take_e, fe, fr[better])
        middle = ~better & (fr < f[:, -2])
        new_x[middle] = xr[middle]
        new_f[middle] = fr[middle]
        outside = ~better & ~middle & (fr < f[:, -1])
        if outside.any():
            xc = centroid[outside] + 0.5 * (xr[outside] - centroid[outside])
            fc = fun(xc)
            ok = fc <= fr[outside]
            sub = np.flatnonzero(outside)
            new_x[sub[ok]] = xc[ok]
            new_f[sub[ok]] = fc[ok]
            shrink[sub[~ok]] = True
        inside = ~better & ~middle & ~outside
        if inside.any():
            xcc = centroid[inside] + 0.5 * (worst[inside] - centroid[inside])
            fcc = fun(xcc)
            ok = fcc < f[inside, -1]
            sub = np.flatnonzero(inside)
            new_x[sub[ok]] = xcc[ok]
            new_f[sub[ok]] = fcc[ok]
            shrink[sub[~ok]] = True
        s[:, -1] = new_x
        f[:, -1] = new_f
        if shrink.any():
            ss = s[shrink]
            ss[:, 1:] = ss[:, :1] + 0.5 * (ss[:, 1:] - ss[:, :1])
            s[shrink] = ss
            f[shrink, 1:] = fun(ss[:, 1:].reshape(-1, n)).reshape(-1, n)
        sim[idx], fs[idx] = s, f
    best = np.argmin(fs, axis=1)
    return NelderMeadResult(sim[rows, best], fs[rows, best], iters)


def _best_restart(res: NelderMeadResult) -> int:
    """Lowest value; ties go to the lowest restart index."""
    return int(np.argmin(res.fun))


def minimize_bell_slack(rho: DensityOperator, sign: Sign | str = Sign.MINUS, restarts: int = 64,
                        seed: int = 0, projective: bool = True) -> SearchReport:
    """Multi-start Nelder-Mead over (A1, B1, B2) with A2 = B1.

    Qubit observables default to the unit-Bloch (projective) sphere; pass
    ``projective=False`` for the full ball. Ties go to the lowest restart.
    """
    if restarts < 1:
        raise ContractError("need at least one restart")
    obj = SlackObjective(rho, sign, projective)
    res = batched_nelder_mead(obj, _seeded_starts(seed, restarts, obj.size))
    best_r = _best_restart(res)
    best_x = res.x[best_r]
    mats = tuple(np.asarray(m) for m in obj.matrices(best_x))
    slack = quantum_bell_slack(rho, *mats, sign=obj.sign)
    return SearchReport(slack, mats, restarts, seed, obj.sign, rho.matrix, rho.dims,
                        best_restart=best_r)


# never-violates scan

def random_observable_batch(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    """Haar eigenbases; half the batch has +/-1 spectra, half uniform spectra in [-1, 1]."""
    u = haar_unitary(rng, d, n)
    spec = rng.uniform(-1.0, 1.0, (n, d))
    half = n // 2
    spec[:half] = rng.choice([-1.0, 1.0], (half, d))
    return np.einsum("tij,tj,tkj->tik", u, spec, np.conj(u))


@dataclass(frozen=True)
class ScanResult:
    min_slack: float
    trials: int
    seed: int
    argmin: int


def never_violates_scan(rho: DensityOperator, trials: int = 10_000, seed: int = 0,
                        sign: Sign | str = Sign.MINUS, chunk: int = 4096) -> ScanResult:
    """Minimum slack over random observable triples (A1, B1, B2), A2 = B1."""
    obj = SlackObjective(rho, sign)
    rng = np.random.default_rng(seed)
    best, where, done = np.inf, -1, 0
    while done < trials:
        n = min(chunk, trials - done)
        a1, b1, b2 = (coordinates(random_observable_batch(rng, obj.d, n)) for _ in range(3))
        s = obj.slack_from_coords(a1, b1, b2)
        i = int(np.argmin(s))
        if s[i] < best:
            best, where = float(s[i]), done + i
        done += n
    return ScanResult(best, trials, seed, where)


# separable two-qubit search

SEPARABLE_FAMILIES = ("product", "mixture", "identical")


def _bloch(theta, phi) -> np.ndarray:
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)


class _SeparableObjective:
    """Bell slack over (state parameters, observable parameters) for a two-qubit separable family.

    States are mixtures of pure products, so every correlation is a
    weighted sum of products of local Bloch-vector overlaps.
    """

    def __init__(self, family: str, sign: Sign):
        if family not in SEPARABLE_FAMILIES:
            raise ContractError(f"family must be one of {SEPARABLE_FAMILIES}")
        self.family = family
        self.sign = sign
        self.n_state = {"product": 4, "mixture": 9, "identical": 2}[family]
        self.size = self.n_state + 6

    def _split(self, x: np.ndarray):
        """Weights (..., K) and Bloch vectors for Alice and Bob (..., K, 3)."""
        s = x[..., :self.n_state]
        if self.family == "identical":
            r = _bloch(s[..., 0], s[..., 1])[..., None, :]
            return np.ones(s.shape[:-1] + (1,)), r, r
        if self.family == "product":
            return (np.ones(s.shape[:-1] + (1,)), _bloch(s[..., 0], s[..., 1])[..., None, :],
                    _bloch(s[..., 2], s[..., 3])[..., None, :])
        w = 0.5 * (1.0 + np.sin(s[..., 0]))
        weights = np.stack([w, 1.0 - w], axis=-1)
        ra = np.stack([_bloch(s[..., 1], s[..., 2]), _bloch(s[..., 5], s[..., 6])], axis=-2)
        rb = np.stack([_bloch(s[..., 3], s[..., 4]), _bloch(s[..., 7], s[..., 8])], axis=-2)
        return weights, ra, rb

    def _directions(self, x: np.ndarray):
        o = x[..., self.n_state:]
        return tuple(_bloch(o[..., 2 * i], o[..., 2 * i + 1]) for i in range(3))

    def __call__(self, x: np.ndarray) -> np.ndarray | float:
        w, ra, rb = self._split(np.asarray(x, dtype=float))
        a1, b1, b2 = (v[..., None, :] for v in self._directions(np.asarray(x, dtype=float)))
        dot = lambda u, v: np.sum(u * v, axis=-1)
        c11 = np.sum(w * dot(a1, ra) * dot(b1, rb), axis=-1)
        c12 = np.sum(w * dot(a1, ra) * dot(b2, rb), axis=-1)
        c22 = np.sum(w * dot(b1, ra) * dot(b2, rb), axis=-1)
        out = (1.0 + self.sign.factor * c22) - np.abs(c11 - c12)
        return float(out) if np.ndim(out) == 0 else out

    def observables(self, x: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.einsum("i,ijk->jk", n, np.asarray(PAULIS)) for n in self._directions(x))

    def components(self, x: np.ndarray) -> list[tuple[float, np.ndarray, np.ndarray]]:
        w, ra, rb = self._split(np.asarray(x, dtype=float))
        return [(float(w[k]), bloch_matrix(ra[k]), bloch_matrix(rb[k])) for k in range(w.size)]

    def state(self, x: np.ndarray) -> np.ndarray:
        return sum(w * la.kron(pa, pb) for w, pa, pb in self.components(x))


def find_separable_violation(seed: int = 0, restarts: int = 1000, family: str = "product",
                             sign: Sign | str = Sign.MINUS) -> SearchReport:
    """Search two-qubit separable states and projective triples for the most negative slack."""
    sign = Sign.parse(sign)
    obj = _SeparableObjective(family, sign)
    res = batched_nelder_mead(obj, _seeded_starts(seed, restarts, obj.size))
    best_r = _best_restart(res)
    best_x = res.x[best_r]
    mats = tuple(np.asarray(m) for m in obj.observables(best_x))
    rho = DensityOperator(obj.state(best_x), (2, 2))
    slack = quantum_bell_slack(rho, *mats, sign=sign)
    comps = tuple((float(w), pa, pb) for w, pa, pb in obj.components(best_x))
    return SearchReport(slack, mats, restarts, seed, sign, rho.matrix, (2, 2),
                        description=f"separable:{family}", components=comps, best_restart=best_r)


def classical_embedding(report: SearchReport) -> ClassicalAudit:
    """Replay a separable configuration as a classical scenario.

    Each mixture component becomes a point theta with weight p; the
    classical observables are the local quantum expectations, and Alice's
    second setting is given Bob's first observable.
    """
    if not report.components:
        raise ContractError("report has no mixture decomposition to embed")
    a1, b1, b2 = report.argmax
    pi = ClassicalState([w for w, _, _ in report.components])
    va1 = [np.trace(pa @ a1).real for _, pa, _ in report.components]
    vb1 = [np.trace(pb @ b1).real for _, _, pb in report.components]
    vb2 = [np.trace(pb @ b2).real for _, _, pb in report.components]
    clip = lambda v: ClassicalObservable(np.clip(v, -1.0, 1.0))
    return classical_bell_audit(pi, clip(va1), clip(vb1), clip(vb2))


def product_example() -> tuple[DensityOperator, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """The state |z-> (x) |m>, m = (-2/sqrt5, 0, 1/sqrt5), with A1 = -sigma_z, B1 = sigma_z, B2 = sigma_x."""
    from .quantum import PAULI_X, PAULI_Z, product_state

    m = (-2.0 / math.sqrt(5.0), 0.0, 1.0 / math.sqrt(5.0))
    rho = product_state(bloch_matrix((0.0, 0.0, -1.0)), bloch_matrix(m))
    return rho, (-PAULI_Z, PAULI_Z, PAULI_X)
