import numpy as np
import pytest

from bellgap import lhv
from bellgap.errors import ContractError, NumericError, ParseError
from bellgap.scenario import Sign, bell_slack, event_prob, moment

from oracles import PRODUCT_EXAMPLE_SLACK, PRODUCT_MODEL_CONDITION8


def test_model_validation():
    with pytest.raises(ContractError):
        lhv.CorrelationLhvModel([0.5, 0.6], np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ContractError):
        lhv.CorrelationLhvModel([1.0], np.full((2, 1), 1.5), np.zeros((2, 1)))
    with pytest.raises(ContractError):
        lhv.CorrelationLhvModel(np.full(65, 1 / 65), np.zeros((2, 65)), np.zeros((2, 65)))


def test_json_roundtrip(rng):
    m = lhv.random_correlation_model(rng, 5)
    back = lhv.CorrelationLhvModel.from_json(m.to_json())
    assert np.array_equal(back.f1, m.f1)
    with pytest.raises(ParseError):
        lhv.CorrelationLhvModel.from_json({"nu": [1.0]})
    c = lhv.random_conditional_model(rng, 3)
    assert np.array_equal(lhv.ConditionalLhvModel.from_json(c.to_json()).p2, c.p2)


def test_moment_power_bounds(rng):
    m = lhv.random_correlation_model(rng, 4)
    assert lhv.lhv_moment(m, 1, 1, (0, 0)) == pytest.approx(1.0)
    with pytest.raises(ContractError):
        lhv.lhv_moment(m, 1, 1, (2, 1))
    with pytest.raises(ContractError):
        lhv.lhv_moment(m, 3, 1)


def test_one_point_model_of_product_configuration():
    # local expectations of the separable example read as a single hidden variable
    s = 1 / np.sqrt(5)
    m = lhv.CorrelationLhvModel([1.0], [[1.0], [-1.0]], [[s], [-2 * s]])
    assert lhv.condition8_value(m, "minus") == pytest.approx(PRODUCT_MODEL_CONDITION8, abs=1e-12)
    assert bell_slack(lhv.correlation_quad(m), "minus") == pytest.approx(PRODUCT_EXAMPLE_SLACK, abs=1e-12)
    assert not lhv.pointwise_eq12_check(m, "minus")


def test_theorem1_check_flags_inconsistency_only_on_condition_holding():
    rng = np.random.default_rng(3)
    for _ in range(200):
        m = lhv.random_correlation_model(rng, int(rng.integers(1, 9)))
        for sign in Sign:
            assert lhv.theorem1_check(m, sign).consistent


def test_dichotomic_model_satisfies_pointwise_identity(rng):
    for sign in Sign:
        m = lhv.random_dichotomic_model(rng, 6, sign)
        assert lhv.pointwise_eq12_check(m, sign)
        assert lhv.second_moment_gap(m, sign) == pytest.approx(0.0, abs=1e-15)
        i = 1 if sign is Sign.MINUS else -1
        assert lhv.lhv_moment(m, 2, 1) == pytest.approx(i)


def test_induced_correlation_matches_joint_moments(rng):
    m = lhv.random_conditional_model(rng, 5, (-1, 0, 1), (-1, -0.5, 0.5, 1))
    corr = lhv.induced_correlation_model(m)
    for i in (1, 2):
        for k in (1, 2):
            assert lhv.lhv_moment(corr, i, k) == pytest.approx(moment(lhv.lhv_joint(m, i, k), 1, 1), abs=1e-14)


def test_induced_mu_marginals(rng):
    m = lhv.random_conditional_model(rng, 4)
    mu = lhv.induced_mu(m)
    assert np.allclose(mu.marginal(2).probs, lhv.lhv_joint(m, 2, 1).probs)
    assert np.allclose(mu.marginal(1).probs, lhv.lhv_joint(m, 2, 2).probs)


def test_perfectly_correlated_model_event(rng):
    grid = (-1.0, -0.5, 0.5, 1.0)
    for sign, event in ((Sign.MINUS, "eq"), (Sign.PLUS, "neg")):
        m = lhv.perfectly_correlated_model(rng, 6, grid, sign, null_points=2)
        assert event_prob(lhv.lhv_joint(m, 2, 1), event) == pytest.approx(1.0, abs=1e-12)
        assert m.nu[-2:].sum() == 0.0
    with pytest.raises(ContractError):
        lhv.perfectly_correlated_model(rng, 3, (-1.0, 0.0, 0.5), Sign.PLUS)


def test_condition21_matches_condition8_for_induced_models(rng):
    m = lhv.random_conditional_model(rng, 5)
    for sign in Sign:
        # factorized conditionals make the two integrals coincide
        assert lhv.condition21_value(lhv.induced_mu(m), sign) == pytest.approx(
            lhv.condition8_value(lhv.induced_correlation_model(m), sign), abs=1e-14)


def test_cv_expression_and_bounds(rng):
    for _ in range(50):
        mu = lhv.random_dichotomic_measure(rng)
        assert lhv.cv_expression(mu) == pytest.approx(lhv.condition21_value(mu), abs=1e-12)
        b = lhv.dichotomic_mu_bounds(mu)
        assert b.lhs >= b.bound_w - 1e-12 and b.lhs >= b.bound_www - 1e-12


def test_tripartite_validation():
    with pytest.raises(ContractError):
        lhv.TripartiteMeasure(((-1, 1),) * 3, np.full((2, 2, 2), 0.2))
    mu = lhv.TripartiteMeasure(((-1, 0, 1), (-1, 1), (-1, 1)), np.full((3, 2, 2), 1 / 12))
    with pytest.raises(ContractError):
        lhv.cv_expression(mu)
