"""Dense complex linear algebra: tensor products, partial traces, Hermitian eigensolver.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Tensor-factor
bookkeeping is a tuple of factor dimensions (``dims``); factor indices in
the public API are 1-based, matching the usual ``tr^(k)`` notation.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ContractError, DimensionError, ParseError

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 40


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a square complex128 array, raising on non-square input."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def check_shape(dims: Sequence[int], dim: int) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise DimensionError(f"invalid factor dimensions {dims}")
    if int(np.prod(dims)) != dim:
        raise DimensionError(f"factor dimensions {dims} do not multiply to {dim}")
    return dims


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def kron_all(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for op in ops:
        out = kron(out, op)
    return out


def partial_trace(t, dims: Sequence[int], k: int) -> np.ndarray:
    """Trace out factor ``k`` (1-based) of an operator on ``dims``."""
    t = as_matrix(t)
    dims = check_shape(dims, t.shape[0])
    n = len(dims)
    if not 1 <= k <= n:
        raise DimensionError(f"factor index {k} outside 1..{n}")
    j = k - 1
    rest = dims[:j] + dims[j + 1:]
    size = int(np.prod(rest)) if rest else 1
    x = t.reshape(dims + dims)
    x = np.trace(x, axis1=j, axis2=n + j)
    return x.reshape(size, size)


def embed(op, dims: Sequence[int], k: int) -> np.ndarray:
    """Place ``op`` on factor ``k`` (1-based) with identities elsewhere."""
    dims = tuple(dims)
    op = as_matrix(op)
    if op.shape[0] != dims[k - 1]:
        raise DimensionError(f"operator of dim {op.shape[0]} cannot sit on factor of dim {dims[k - 1]}")
    ops = [np.eye(d) for d in dims]
    ops[k - 1] = op
    return kron_all(*ops)


def lift(x, dims: Sequence[int], k: int) -> np.ndarray:
    """Adjoint of :func:`partial_trace`: insert an identity at factor ``k``.

    ``x`` lives on the factors of ``dims`` with factor ``k`` removed; the
    result lives on the full ``dims`` with the original factor order.
    """
    dims = tuple(dims)
    j = k - 1
    rest = dims[:j] + dims[j + 1:]
    x = as_matrix(x).reshape(rest + rest)
    n = len(rest)
    ident = np.eye(dims[j])
    y = np.multiply.outer(x, ident)  # axes: rest_row, rest_col, kr, kc
    # move the identity axes into position j of the row block and of the column block
    y = np.moveaxis(y, [2 * n, 2 * n + 1], [j, n + 1 + j])
    dim = int(np.prod(dims))
    return y.reshape(dim, dim)


def permute_factors(t, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: new factor ``i`` is old factor ``perm[i]`` (0-based)."""
    t = as_matrix(t)
    dims = check_shape(dims, t.shape[0])
    n = len(dims)
    perm = list(perm)
    x = t.reshape(dims + dims).transpose(perm + [n + p for p in perm])
    return x.reshape(t.shape)


@lru_cache(maxsize=None)
def _swap(d: int) -> np.ndarray:
    v = np.zeros((d * d, d * d), dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            v[j * d + i, i * d + j] = 1.0
    v.setflags(write=False)
    return v


def swap_operator(d: int) -> np.ndarray:
    """Basis-permutation operator exchanging the two factors of C^d (x) C^d."""
    return _swap(int(d)).copy()


def dagger(a) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitize(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Symmetrize ``a`` if it is Hermitian up to ``tol``; raise otherwise."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {a.shape}")
    asym = np.max(np.abs(a - dagger(a))) if a.size else 0.0
    if asym >= tol:
        raise ContractError(f"matrix is not Hermitian (asymmetry {asym:.3g})")
    return 0.5 * (a + dagger(a))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a, dtype=np.complex128)
    return bool(np.max(np.abs(a - dagger(a))) < tol)


@lru_cache(maxsize=None)
def _round_robin(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Pairings for parallel Jacobi: every index pair exactly once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p < n and q < n:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _offdiag_norm(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    off = a * (1.0 - np.eye(n))
    return np.sqrt(np.sum(off.real ** 2 + off.imag ** 2, axis=(-2, -1)))


def _jacobi(a: np.ndarray, v: np.ndarray, tol: float, max_sweeps: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Cyclic complex Jacobi on a stack of Hermitian matrices (in place).

    Rotations in one round act on disjoint index pairs, so a whole round is
    applied at once; a sweep of ``n - 1`` rounds visits every pair once.
    """
    n = a.shape[-1]
    rounds = _round_robin(n)
    scale = np.maximum(1.0, np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1))))
    sweeps = 0
    while sweeps < max_sweeps and np.any(_offdiag_norm(a) >= tol * scale):
        sweeps += 1
        for P, Q in rounds:
            app = a[..., P, P].real
            aqq = a[..., Q, Q].real
            apq = a[..., P, Q]
            r = np.abs(apq)
            active = r > 0.0
            safe_r = np.where(active, r, 1.0)
            theta = (aqq - app) / (2.0 * safe_r)
            sgn = np.where(theta >= 0.0, 1.0, -1.0)
            t = sgn / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            phase = np.where(active, np.conj(apq) / safe_r, 1.0)
            g_pp, g_pq = c, s
            g_qp, g_qq = -s * phase, c * phase
            # columns: A <- A G, V <- V G
            for m in (a, v):
                cp = m[..., :, P].copy()
                cq = m[..., :, Q]
                m[..., :, P] = cp * g_pp[..., None, :] + cq * g_qp[..., None, :]
                m[..., :, Q] = cp * g_pq[..., None, :] + cq * g_qq[..., None, :]
            # rows: A <- G^dagger A
            rp = a[..., P, :].copy()
            rq = a[..., Q, :]
            a[..., P, :] = np.conj(g_pp)[..., None] * rp + np.conj(g_qp)[..., None] * rq
            a[..., Q, :] = np.conj(g_pq)[..., None] * rp + np.conj(g_qq)[..., None] * rq
            a[..., P, Q] = 0.0
            a[..., Q, P] = 0.0
    return a, v, sweeps


def hermitian_eig(a, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS,
                  guess: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix (or a stack of them).

    Returns real eigenvalues in descending order and the matching
    orthonormal eigenvectors as columns. ``guess`` is an optional unitary
    whose columns approximate the eigenvectors; it only speeds up the
    iteration.
    """
    h = hermitize(a)
    n = h.shape[-1]
    if n == 0:
        return np.zeros(h.shape[:-1]), h.copy()
    if guess is not None:
        v = np.array(np.broadcast_to(guess, h.shape), dtype=np.complex128)
        work = dagger(v) @ h @ v
    else:
        v = np.array(np.broadcast_to(np.eye(n, dtype=np.complex128), h.shape))
        work = h.copy()
    work, v, _ = _jacobi(work, v, tol, max_sweeps)
    w = np.diagonal(work, axis1=-2, axis2=-1).real
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    return w, v


def eigvalsh(a) -> np.ndarray:
    return hermitian_eig(a)[0]


def operator_norm(a) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    w = eigvalsh(a)
    return float(np.max(np.abs(w))) if w.size else 0.0


def is_psd(a, tol: float = PSD_TOL) -> bool:
    if not is_hermitian(a):
        return False
    w = eigvalsh(a)
    return bool(w.size == 0 or w[-1] >= -tol)


def psd_projection(a, guess: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Nearest PSD matrix in Frobenius norm (eigenvalue clipping).

    Also returns the eigenvectors so callers can warm-start the next call.
    """
    w, v = hermitian_eig(a, guess=guess)
    w = np.clip(w, 0.0, None)
    return (v * w) @ dagger(v), v


def matrix_to_json(a) -> list:
    """Row-major nested list of ``[re, im]`` pairs."""
    a = np.asarray(a, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(data) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix JSON is not a numeric array: {exc}") from exc
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ParseError(f"matrix JSON must be rows of [re, im] pairs, got shape {arr.shape}")
    return as_matrix(arr[..., 0] + 1j * arr[..., 1])
