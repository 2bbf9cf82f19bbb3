import numpy as np
import pytest

from bellgap.errors import ContractError, ParseError
from bellgap.scenario import (CorrelationQuad, JointDistribution, Sign, bell_slack, chsh_value,
                              dichotomic_conditions, event_prob, moment, outcome_grid)

from oracles import brute_moment


def test_sign_parse_and_factor():
    assert Sign.parse("MINUS") is Sign.MINUS
    assert Sign.parse(Sign.PLUS) is Sign.PLUS
    assert Sign.MINUS.factor == -1.0 and Sign.PLUS.factor == 1.0
    with pytest.raises(ContractError):
        Sign.parse("zero")


def test_outcome_grid_validation():
    assert outcome_grid([1, -1, 0]) == (-1.0, 0.0, 1.0)
    for bad in ([], [2.0], [0.5, 0.5], [float("nan")]):
        with pytest.raises(ContractError):
            outcome_grid(bad)


def test_joint_distribution_sorts_and_normalizes():
    p = JointDistribution((1, -1), (-1, 1), [[0.1, 0.2], [0.3, 0.4]])
    assert p.grid1 == (-1.0, 1.0)
    assert np.allclose(p.probs, [[0.3, 0.4], [0.1, 0.2]])
    with pytest.raises(ContractError):
        JointDistribution((-1, 1), (-1, 1), [[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(ContractError):
        JointDistribution((-1, 1), (-1, 1), [[1.5, -0.5], [0.0, 0.0]])


def test_joint_json_roundtrip():
    p = JointDistribution((-1, 0, 1), (-1, 1), np.full((3, 2), 1 / 6))
    q = JointDistribution.from_json(p.to_json())
    assert q.grid1 == p.grid1 and np.allclose(q.probs, p.probs)
    with pytest.raises(ParseError):
        JointDistribution.from_json({"grid1": [1]})


def test_moment_matches_brute_force(rng):
    g1, g2 = (-1.0, -0.25, 0.5, 1.0), (-1.0, 0.0, 1.0)
    probs = rng.dirichlet(np.ones(12)).reshape(4, 3)
    p = JointDistribution(g1, g2, probs)
    for m, n in ((1, 1), (2, 0), (0, 2), (1, 0)):
        assert moment(p, m, n) == pytest.approx(brute_moment(g1, g2, probs, m, n), abs=1e-14)


def test_event_probabilities():
    p = JointDistribution((-1, 1), (-1, 1), [[0.4, 0.1], [0.2, 0.3]])
    assert event_prob(p, "eq") == pytest.approx(0.7)
    assert event_prob(p, "λ1=-λ2") == pytest.approx(0.3)
    assert event_prob(p, "prod+1") == pytest.approx(0.7)
    with pytest.raises(ContractError):
        event_prob(p, "maybe")


def test_point_mass():
    p = JointDistribution.point_mass(1.0, -1.0)
    assert moment(p, 1, 1) == -1.0


def test_bell_slack_both_signs():
    c = CorrelationQuad(c11=0.5, c12=-0.5, c22=0.25)
    assert bell_slack(c, "minus") == pytest.approx(0.75 - 1.0)
    assert bell_slack(c, "plus") == pytest.approx(1.25 - 1.0)
    with pytest.raises(ContractError):
        CorrelationQuad(1.5, 0, 0)


def test_chsh_value_needs_four():
    with pytest.raises(ContractError):
        chsh_value(CorrelationQuad(1, 1, 1))
    assert chsh_value(CorrelationQuad(1, 1, -1, 1)) == pytest.approx(4.0)


def test_dichotomic_conditions_branches():
    perfect = JointDistribution((-1, 1), (-1, 1), [[0.5, 0.0], [0.0, 0.5]])
    anti = JointDistribution((-1, 1), (-1, 1), [[0.0, 0.5], [0.5, 0.0]])
    half = JointDistribution((-1, 1), (-1, 1), np.full((2, 2), 0.25))
    assert dichotomic_conditions(perfect, half).which == "perfect"
    assert dichotomic_conditions(anti, half).which == "bound"
    v = dichotomic_conditions(half, perfect)
    assert not v.holds and v.which == "none"
    assert dichotomic_conditions(anti, half, "plus").which == "perfect"
    with pytest.raises(ContractError):
        dichotomic_conditions(JointDistribution((-1, 0, 1), (-1, 1), np.full((3, 2), 1 / 6)), half)
