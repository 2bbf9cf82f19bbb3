"""Seeded property checks across modules (hypothesis, derandomized)."""

import numpy as np
from hypothesis import given, strategies as st

from bellgap import classical as cl
from bellgap import lhv
from bellgap import quantum as qm
from bellgap import search as se
from bellgap.scenario import Sign, bell_slack

from oracles import lhv_chsh_bound

seeds = st.integers(min_value=0, max_value=2**32 - 1)
signs = st.sampled_from(list(Sign))


@given(seeds, st.integers(min_value=1, max_value=16), signs)
def test_condition8_implies_inequality(seed, omega, sign):
    m = lhv.random_correlation_model(np.random.default_rng(seed), omega)
    chk = lhv.theorem1_check(m, sign)
    assert chk.consistent
    if chk.condition8 >= 0:
        assert chk.slack >= -1e-12


@given(seeds, st.integers(min_value=1, max_value=16))
def test_lhv_chsh_bounded_by_deterministic_strategies(seed, omega):
    m = lhv.random_correlation_model(np.random.default_rng(seed), omega)
    q = lhv.correlation_quad(m)
    assert abs(q.c11 + q.c12 + q.c21 - q.c22) <= lhv_chsh_bound(q.c11, q.c12, q.c21, q.c22) + 1e-12


@given(seeds, st.integers(min_value=1, max_value=32))
def test_classical_audit_never_negative(seed, n):
    rng = np.random.default_rng(seed)
    pi = cl.random_state(rng, n)
    a1, b1, b2 = (cl.random_observable(rng, n) for _ in range(3))
    assert cl.classical_bell_audit(pi, a1, b1, b2).slack >= -1e-12


@given(seeds, st.sampled_from([2, 3]), signs)
def test_slack_objective_agrees_with_trace_formula(seed, d, sign):
    rng = np.random.default_rng(seed)
    rho = qm.random_state(rng, d, d)
    obj = se.SlackObjective(rho, sign)
    x = rng.uniform(-np.pi, np.pi, obj.size)
    a1, b1, b2 = obj.matrices(x)
    c = lambda a, b: np.trace(rho.matrix @ np.kron(a, b)).real
    direct = (1.0 + sign.factor * c(b1, b2)) - abs(c(a1, b1) - c(a1, b2))
    assert abs(obj(x) - direct) <= 1e-12


@given(seeds, st.floats(min_value=0.0, max_value=1.0))
def test_werner_slack_never_negative_on_random_observables(seed, phi):
    rng = np.random.default_rng(seed)
    rho = qm.werner_state(2, phi)
    a1, b1, b2 = (qm.random_observable(rng, 2) for _ in range(3))
    assert qm.quantum_bell_slack(rho, a1, b1, b2) >= -1e-12
