"""Independent reference computations and frozen expected values.

Everything here avoids the package under test: plain loops or numpy's own
routines, so a shared bug cannot hide on both sides of a comparison. The
constants were produced by these functions once and are kept as literals.
"""

import itertools
import math

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

# (1 - c22) - |c11 - c12| for |z-> (x) |m>, m = (-2/sqrt5, 0, 1/sqrt5),
# A1 = -sz, B1 = sz, B2 = sx; c11 = 1/sqrt5, c12 = -2/sqrt5, c22 = 2/sqrt5
PRODUCT_EXAMPLE_SLACK = -1.2360679774997898
# the same configuration read as a one-point LHV model
PRODUCT_MODEL_CONDITION8 = -1.2944271909999159
# singlet, A1 = B1 = sz, B2 at 120 degrees in the x-z plane
SINGLET_120_SLACK = -1.0
# slack for the product state |z-> (x) |z+> with A1 = sz, B1 = -sz, B2 = sz
PRODUCT_GLOBAL_MIN = -2.0


def loop_partial_trace(t, dims, k):
    """Partial trace over factor k (1-based) by explicit index enumeration."""
    dims = list(dims)
    n = len(dims)
    keep = [i for i in range(n) if i != k - 1]
    out_dim = int(np.prod([dims[i] for i in keep]))
    out = np.zeros((out_dim, out_dim), dtype=complex)

    def flat(idx, which):
        v = 0
        for i in which:
            v = v * dims[i] + idx[i]
        return v

    for row in itertools.product(*[range(d) for d in dims]):
        for col in itertools.product(*[range(d) for d in dims]):
            if row[k - 1] != col[k - 1]:
                continue
            full_r = flat(row, range(n))
            full_c = flat(col, range(n))
            out[flat(row, keep), flat(col, keep)] += t[full_r, full_c]
    return out


def product_example_slack():
    """4x4 trace arithmetic for the separable example, using numpy's own kron."""
    zm = np.array([0, 1], dtype=complex)
    m = np.array([-2 / math.sqrt(5), 0, 1 / math.sqrt(5)])
    rho_b = 0.5 * (I2 + m[0] * SX + m[1] * SY + m[2] * SZ)
    rho = np.kron(np.outer(zm, zm.conj()), rho_b)
    a1, b1, b2 = -SZ, SZ, SX
    c = lambda a, b: np.trace(rho @ np.kron(a, b)).real
    return (1 - c(b1, b2)) - abs(c(a1, b1) - c(a1, b2))


def singlet_matrix():
    v = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
    return np.outer(v, v.conj())


def spin(n):
    return n[0] * SX + n[1] * SY + n[2] * SZ


def lhv_chsh_bound(c11, c12, c21, c22):
    """Max of |c11 + c12 + c21 - c22| over deterministic +/-1 strategies (always 2)."""
    best = 0.0
    for a1, a2, b1, b2 in itertools.product((-1, 1), repeat=4):
        best = max(best, abs(a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2))
    return best


def brute_moment(grid1, grid2, probs, m, n):
    total = 0.0
    for i, x in enumerate(grid1):
        for j, y in enumerate(grid2):
            total += x ** m * y ** n * probs[i][j]
    return total


def werner_correlation_formula(phi):
    return (2 * phi - 1) / 3
