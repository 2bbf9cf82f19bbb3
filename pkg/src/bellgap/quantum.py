"""Bipartite quantum states, POVMs, correlation functions and the Werner/noisy state families."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import ContractError, DimensionError, NumericError, ParseError
from .scenario import JointDistribution, Sign, outcome_grid

STATE_TOL = 1e-10
POVM_TOL = 1e-9
SPECTRUM_TOL = 1e-9
IMAG_TOL = 1e-9
CLIP_TOL = 1e-12
MERGE_TOL = 1e-9

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    dims: tuple[int, int]

    def __post_init__(self):
        m = la.as_matrix(self.matrix)
        dims = la.check_shape(self.dims, m.shape[0])
        m = la.hermitize(m, STATE_TOL)
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise ContractError(f"density operator has trace {tr!r}")
        w = la.eigvalsh(m)
        if w[-1] < -STATE_TOL:
            raise ContractError(f"density operator has negative eigenvalue {w[-1]:.3g}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def tensor(self) -> np.ndarray:
        """Matrix reshaped to (d1, d2, d1, d2) for contractions."""
        d1, d2 = self.dims
        return self.matrix.reshape(d1, d2, d1, d2)

    def reduced(self, keep: int) -> np.ndarray:
        """Reduced state on factor ``keep`` (1 or 2)."""
        return la.partial_trace(self.matrix, self.dims, 3 - keep)

    def to_json(self) -> dict:
        return {"matrix": la.matrix_to_json(self.matrix), "dims": list(self.dims)}

    @classmethod
    def from_json(cls, data: dict) -> "DensityOperator":
        try:
            return cls(la.matrix_from_json(data["matrix"]), tuple(data["dims"]))
        except KeyError as exc:
            raise ParseError(f"state JSON lacks field {exc}") from None


@dataclass(frozen=True)
class ObservableOp:
    """Hermitian operator with spectrum in [-1, 1]."""

    matrix: np.ndarray

    def __post_init__(self):
        m = la.hermitize(la.as_matrix(self.matrix))
        w = la.eigvalsh(m)
        if w.size and (w[0] > 1.0 + SPECTRUM_TOL or w[-1] < -1.0 - SPECTRUM_TOL):
            raise ContractError(f"observable spectrum [{w[-1]:.6g}, {w[0]:.6g}] leaves [-1, 1]")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_json(self) -> list:
        return la.matrix_to_json(self.matrix)


@dataclass(frozen=True)
class Povm:
    """Finite-outcome POVM; ``effects[j]`` belongs to outcome ``grid[j]``."""

    grid: tuple[float, ...]
    effects: np.ndarray

    def __post_init__(self):
        raw = [float(x) for x in self.grid]
        grid = outcome_grid(raw)
        effects = np.array(self.effects, dtype=np.complex128)
        if effects.ndim != 3 or effects.shape[0] != len(grid) or effects.shape[1] != effects.shape[2]:
            raise DimensionError(f"effects shape {effects.shape} does not match {len(grid)} outcomes")
        effects = effects[np.argsort(raw, kind="stable")]
        effects = la.hermitize(effects)
        w = la.eigvalsh(effects)
        if np.min(w[..., -1]) < -POVM_TOL:
            raise ContractError("POVM effect is not positive semidefinite")
        d = effects.shape[1]
        if np.max(np.abs(effects.sum(axis=0) - np.eye(d))) > POVM_TOL:
            raise ContractError("POVM effects do not sum to the identity")
        effects.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    def to_json(self) -> dict:
        return {"grid": list(self.grid), "effects": [la.matrix_to_json(e) for e in self.effects]}

    @classmethod
    def from_json(cls, data: dict) -> "Povm":
        try:
            return cls(data["grid"], [la.matrix_from_json(e) for e in data["effects"]])
        except KeyError as exc:
            raise ParseError(f"POVM JSON lacks field {exc}") from None


def _as_observable(a) -> ObservableOp:
    return a if isinstance(a, ObservableOp) else ObservableOp(a)


def _expectation(rho: DensityOperator, a: np.ndarray, b: np.ndarray) -> complex:
    d1, d2 = rho.dims
    if a.shape != (d1, d1) or b.shape != (d2, d2):
        raise DimensionError(f"operators of dims {a.shape[0]}, {b.shape[0]} do not fit state dims {rho.dims}")
    return np.einsum("aibj,ba,ji->", rho.tensor(), a, b)


def _real(z: complex) -> float:
    if abs(z.imag) > IMAG_TOL:
        raise NumericError(f"expectation has imaginary part {z.imag:.3g}")
    return float(z.real)


def quantum_joint(rho: DensityOperator, ma: Povm, mb: Povm) -> JointDistribution:
    d1, d2 = rho.dims
    if ma.dim != d1 or mb.dim != d2:
        raise DimensionError(f"POVM dims ({ma.dim}, {mb.dim}) do not match state dims {rho.dims}")
    p = np.einsum("aibj,xba,yji->xy", rho.tensor(), ma.effects, mb.effects)
    if np.max(np.abs(p.imag)) > IMAG_TOL:
        raise NumericError("joint probabilities have imaginary parts")
    p = p.real
    if np.min(p) < -CLIP_TOL:
        raise NumericError(f"negative joint probability {np.min(p):.3g}")
    p = np.clip(p, 0.0, 1.0)
    return JointDistribution(ma.grid, mb.grid, p)


def observable_from_povm(m: Povm) -> ObservableOp:
    return ObservableOp(np.einsum("x,xij->ij", np.asarray(m.grid), m.effects))


def projective_povm(a, merge_tol: float = MERGE_TOL, decimals: int = 10) -> Povm:
    """Spectral measure of an observable; eigenvalues closer than ``merge_tol`` share an outcome."""
    a = _as_observable(a)
    w, v = la.hermitian_eig(a.matrix)
    groups: list[list[int]] = []
    for j, lam in enumerate(w):
        if groups and abs(w[groups[-1][0]] - lam) <= merge_tol:
            groups[-1].append(j)
        else:
            groups.append([j])
    values = []
    effects = []
    for g in groups:
        lam = float(np.clip(np.round(np.mean(w[g]), decimals), -1.0, 1.0)) + 0.0
        values.append(lam)
        vg = v[:, g]
        effects.append(vg @ la.dagger(vg))
    return Povm(values, effects)


def correlation(rho: DensityOperator, a, b) -> float:
    """tr[rho (A (x) B)]."""
    return _real(_expectation(rho, _as_observable(a).matrix, _as_observable(b).matrix))


def local_mean(rho: DensityOperator, a, site: int) -> float:
    a = _as_observable(a).matrix
    d1, d2 = rho.dims
    if site == 1:
        return _real(_expectation(rho, a, np.eye(d2)))
    return _real(_expectation(rho, np.eye(d1), a))


def quantum_bell_slack(rho: DensityOperator, a1, b1, b2, sign: Sign | str = Sign.MINUS) -> float:
    """Slack of the original Bell inequality with Alice's second setting measuring B1.

    (1 -/+ tr[rho B1 (x) B2]) - |tr[rho A1 (x) B1] - tr[rho A1 (x) B2]|.
    """
    sign = Sign.parse(sign)
    d1, d2 = rho.dims
    if d1 != d2:
        raise DimensionError("the A2 = B1 scenario needs equal factor dimensions")
    c11 = correlation(rho, a1, b1)
    c12 = correlation(rho, a1, b2)
    c22 = correlation(rho, b1, b2)
    return (1.0 + sign.factor * c22) - abs(c11 - c12)


def chsh(rho: DensityOperator, a1, a2, b1, b2) -> float:
    return abs(correlation(rho, a1, b1) + correlation(rho, a1, b2)
               + correlation(rho, a2, b1) - correlation(rho, a2, b2))


# state families

def ket(*amplitudes) -> np.ndarray:
    v = np.asarray(amplitudes, dtype=np.complex128)
    return v / np.linalg.norm(v)


def singlet_vector() -> np.ndarray:
    e1, e2 = np.eye(2)
    return (np.kron(e1, e2) - np.kron(e2, e1)) / np.sqrt(2.0)


def pure_state(psi, dims: Sequence[int]) -> DensityOperator:
    psi = np.asarray(psi, dtype=np.complex128)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-9:
        raise ContractError(f"state vector has norm {nrm!r}")
    return DensityOperator(np.outer(psi, psi.conj()), tuple(dims))


def singlet() -> DensityOperator:
    return pure_state(singlet_vector(), (2, 2))


def bloch_matrix(r: Sequence[float]) -> np.ndarray:
    """Qubit density matrix (I + r.sigma)/2 for a Bloch vector with |r| <= 1."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,) or np.linalg.norm(r) > 1.0 + 1e-9:
        raise ContractError(f"invalid Bloch vector {r}")
    return 0.5 * (PAULI_I + sum(c * s for c, s in zip(r, PAULIS)))


def product_state(*factors) -> DensityOperator:
    mats = [la.as_matrix(f) for f in factors]
    return DensityOperator(la.kron_all(*mats), tuple(m.shape[0] for m in mats))


def symmetric_projectors(d: int) -> tuple[np.ndarray, np.ndarray]:
    v = la.swap_operator(d)
    ident = np.eye(d * d)
    return 0.5 * (ident + v), 0.5 * (ident - v)


def werner_state(d: int, phi: float) -> DensityOperator:
    if d < 2:
        raise ContractError("Werner states need d >= 2")
    if not -1.0 <= phi <= 1.0:
        raise ContractError(f"Werner parameter {phi} outside [-1, 1]")
    p_plus, p_minus = symmetric_projectors(d)
    r_plus, r_minus = d * (d + 1) / 2, d * (d - 1) / 2
    w = 0.5 * (1 + phi) * p_plus / r_plus + 0.5 * (1 - phi) * p_minus / r_minus
    return DensityOperator(w, (d, d))


@dataclass(frozen=True)
class NoisyState:
    state: DensityOperator
    gamma: float
    beta_max: float


def noisy_gamma(psi, d: int) -> float:
    """d times the operator norm of a reduced state of |psi><psi|."""
    proj = np.outer(psi, np.conj(psi))
    return d * la.operator_norm(la.partial_trace(proj, (d, d), 1))


def noisy_state(psi, beta: float, force: bool = False) -> NoisyState:
    """beta |psi><psi| + (1 - beta) I / d^2 with the admissible range of beta checked.

    ``force=True`` builds states outside the range, which are no longer
    guaranteed to belong to the never-violating class.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    d = int(round(np.sqrt(psi.size)))
    if d * d != psi.size:
        raise DimensionError(f"state vector of length {psi.size} is not on C^d (x) C^d")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
        raise ContractError("state vector is not normalized")
    gamma = noisy_gamma(psi, d)
    beta_max = 1.0 / (2.0 * gamma ** 3 + 1.0)
    if not force and not 0.0 <= beta <= beta_max + 1e-12:
        raise ContractError(f"beta={beta} outside [0, {beta_max:.6g}]")
    eta = beta * np.outer(psi, psi.conj()) + (1.0 - beta) * np.eye(d * d) / (d * d)
    return NoisyState(DensityOperator(eta, (d, d)), gamma, beta_max)


def noisy_singlet(beta: float, force: bool = False) -> DensityOperator:
    return noisy_state(singlet_vector(), beta, force).state


def unit_vector(n: Sequence[float]) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ContractError(f"direction {n} is not a unit 3-vector")
    return n


def spin_observable(n: Sequence[float]) -> ObservableOp:
    n = unit_vector(n)
    return ObservableOp(sum(c * s for c, s in zip(n, PAULIS)))


def conditional_outcome_probs(beta: float, n: Sequence[float]) -> dict[str, float]:
    """Probabilities that Bob's projective spin outcome equals / differs from Alice's,
    given Alice's outcome, on the noisy singlet."""
    if not 0.0 <= beta <= 1.0 / 3.0 + 1e-12:
        raise ContractError(f"beta={beta} outside [0, 1/3]")
    rho = noisy_singlet(beta)
    m = projective_povm(spin_observable(n))
    p = quantum_joint(rho, m, m).probs
    out = {}
    for i, label in ((1, "plus"), (0, "minus")):
        pa = p[i].sum()
        out[label] = (p[i, i] / pa, p[i, 1 - i] / pa)
    same, different = out["plus"]
    if abs(same - out["minus"][0]) > 1e-12:
        raise NumericError("conditional probabilities depend on Alice's outcome")
    return {"same": float(same), "different": float(different)}


def noisy_povm(a, eps: float) -> Povm:
    """Projective measurement of ``a`` mixed with a fair coin: (1 - eps) P + eps/2 I per outcome.

    Only meaningful for two-outcome observables.
    """
    m = projective_povm(a)
    if len(m.grid) != 2:
        raise ContractError("noisy_povm needs a two-outcome observable")
    d = m.dim
    return Povm(m.grid, (1.0 - eps) * m.effects + eps / 2.0 * np.eye(d))


def haar_unitary(rng: np.random.Generator, d: int, size: int | None = None) -> np.ndarray:
    """Haar-random unitaries via QR with the phase fix; shape (d, d) or (size, d, d)."""
    shape = (d, d) if size is None else (size, d, d)
    z = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[..., None, :]


def random_observable(rng: np.random.Generator, d: int, dichotomic: bool = False) -> ObservableOp:
    u = haar_unitary(rng, d)
    spec = rng.choice([-1.0, 1.0], d) if dichotomic else rng.uniform(-1.0, 1.0, d)
    return ObservableOp((u * spec) @ la.dagger(u))


def random_dichotomic_povm(rng: np.random.Generator, d: int) -> Povm:
    """Two-outcome POVM {I - E, E} on outcomes (-1, +1) with E having uniform spectrum in [0, 1]."""
    u = haar_unitary(rng, d)
    e = (u * rng.uniform(0.0, 1.0, d)) @ la.dagger(u)
    return Povm((-1.0, 1.0), np.stack([np.eye(d) - e, e]))


def random_state(rng: np.random.Generator, d1: int, d2: int, rank: int | None = None) -> DensityOperator:
    n = d1 * d2
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    m = g @ la.dagger(g)
    return DensityOperator(m / np.trace(m).real, (d1, d2))
