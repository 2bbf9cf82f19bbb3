import warnings

import numpy as np
import pytest

from bellgap import linalg as la
from bellgap import quantum as qm
from bellgap import source as src
from bellgap.errors import ContractError, DimensionError, NumericError, ParseError
from bellgap.lhv import condition21_value


def state_from_symmetric(sigma, d):
    return qm.DensityOperator(la.partial_trace(sigma, (d, d, d), 3), (d, d))


def test_direction_parse():
    assert src.Direction.parse("LEFT") is src.Direction.LEFT
    with pytest.raises(ContractError):
        src.Direction.parse("up")


def test_source_operator_validation():
    with pytest.raises(DimensionError):
        src.SourceOperator(np.eye(12) / 12, (2, 3, 2))
    with pytest.raises(ContractError):
        src.SourceOperator(np.eye(8), (2, 2, 2))
    with pytest.raises(DimensionError):
        src.SourceOperator(np.eye(12) / 12, (2, 3, 2), "left")


def test_source_json_roundtrip(rng):
    sigma = src.random_symmetric_state(rng, 2)
    r = src.SourceOperator(sigma, (2, 2, 2), "left")
    back = src.SourceOperator.from_json(r.to_json())
    assert back.direction is src.Direction.LEFT and np.array_equal(back.matrix, r.matrix)
    with pytest.raises(ParseError):
        src.SourceOperator.from_json({"dims": [2, 2, 2]})


def test_symmetric_state_is_a_source(rng):
    for d in (2, 3):
        sigma = src.random_symmetric_state(rng, d, rank=3)
        rho = state_from_symmetric(sigma, d)
        r = src.SourceOperator(sigma, (d, d, d))
        assert src.verify_source(r, rho)
        assert src.property39_check(r, rho)
        assert np.allclose(src.symmetrize(sigma, d), sigma)


def test_product_source():
    phi = qm.ket(1, 2, 1j)
    r = src.product_source(phi)
    rho = qm.pure_state(np.kron(phi, phi), (3, 3))
    assert src.property39_residual(r, rho) < 1e-14


def test_mirror_source(rng):
    # a left-directed source for rho on (d1, d1, d2): traces over factors 1 and 2 give rho
    d1, d2 = 2, 3
    rho_b = qm.random_state(rng, 1, d2).matrix
    phi = qm.ket(1, 1j)
    p = np.outer(phi, phi.conj())
    t = src.SourceOperator(la.kron_all(p, p, rho_b), (d1, d1, d2), "left")
    rho = qm.DensityOperator(la.kron(p, rho_b), (d1, d2))
    assert src.verify_source(t, rho)
    mirrored = src.mirror_source(t)
    assert mirrored.direction is src.Direction.RIGHT
    assert src.verify_source(mirrored, src.swapped_state(rho))
    with pytest.raises(ContractError):
        src.mirror_source(mirrored)


def test_source_residual_dims(rng):
    r = src.product_source(qm.ket(1, 0))
    with pytest.raises(DimensionError):
        src.source_residual(r, qm.random_state(rng, 3, 3))


def test_tensor_positivity_verdicts(rng):
    v = src.tensor_positivity(la.swap_operator(2), (2, 2), restarts=8)
    assert not v.found_witness and v.min_value >= -1e-10
    v = src.tensor_positivity(-np.eye(8), (2, 2, 2), restarts=4)
    assert v.found_witness and v.min_value == pytest.approx(-1.0)
    assert v.restart == 0
    vals = src.product_expectation(-np.eye(8), (2, 2, 2), [w[None] for w in v.witness])
    assert vals[0] == pytest.approx(-1.0)
    # the swap's product expectations lie in [0, 1], so a shift past 1 exposes a witness
    z = la.swap_operator(2) - 1.1 * np.eye(4)
    assert src.tensor_positivity(z, (2, 2), restarts=4).found_witness


def test_tensor_positivity_is_seeded(rng):
    g = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    z = g + g.conj().T
    a = src.tensor_positivity(z, (3, 3), restarts=6, seed=4)
    b = src.tensor_positivity(z, (3, 3), restarts=6, seed=4)
    assert a.min_value == b.min_value and a.restart == b.restart


def test_condition32_requires_source(rng):
    sigma = src.random_symmetric_state(rng, 2)
    rho = state_from_symmetric(sigma, 2)
    r = src.SourceOperator(sigma, (2, 2, 2))
    a = qm.random_observable(rng, 2)
    b = qm.random_observable(rng, 2)
    expected = np.trace(src.sigma_of(r) @ la.kron(a.matrix, b.matrix)).real - qm.correlation(rho, a, b)
    assert src.condition32(r, rho, a, b) == pytest.approx(expected, abs=1e-14)
    # with a symmetric source sigma_R is rho itself, so the minus-sign value vanishes
    assert src.condition32(r, rho, a, b) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ContractError):
        src.condition32(r, qm.werner_state(2, 0.3), a, b)


def test_tau_pipeline_on_symmetric_source(rng):
    sigma = src.random_symmetric_state(rng, 2)
    rho = state_from_symmetric(sigma, 2)
    r = src.SourceOperator(sigma, (2, 2, 2))
    povms = [qm.random_dichotomic_povm(rng, 2) for _ in range(4)]
    rep = src.tau_pipeline(r, rho, povms)
    assert rep.marginals_ok and rep.compatible and rep.tensor_positive
    assert rep.a5_residual < 1e-12
    assert rep.condition21 == pytest.approx(condition21_value(rep.tau2), abs=0)


def test_tau_pipeline_warns_on_non_tensor_positive():
    # rho = I/4; the Z(x)Z(x)Z term is invisible to every pair trace
    d = 2
    ident = np.eye(8) / 8
    z = qm.PAULI_Z
    r = src.SourceOperator(ident - 0.5 * la.kron_all(z, z, z), (2, 2, 2))
    rho = qm.DensityOperator(np.eye(4) / 4, (d, d))
    assert src.verify_source(r, rho)
    povms = [qm.projective_povm(z)] * 4
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with pytest.raises(NumericError):
            src.tau_pipeline(r, rho, povms)
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_marginal_projection_hits_affine_set(rng):
    d = 2
    rho = state_from_symmetric(src.random_symmetric_state(rng, d), d)
    g = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    x = src.marginal_projection(g + g.conj().T, rho.matrix, d)
    for k in (1, 2, 3):
        assert np.allclose(la.partial_trace(x, (d, d, d), k), rho.matrix, atol=1e-12)


def test_extension_finder_product_and_singlet():
    phi = qm.ket(1, 1j, 0.5)
    rho = qm.pure_state(np.kron(phi, phi), (3, 3))
    res = src.find_positive_extension(rho)
    assert res.found and res.marginal_residual < 1e-7
    assert la.is_psd(res.r.matrix)
    sing = src.find_positive_extension(qm.singlet())
    assert not sing.found and sing.support_dim == 0


def test_extension_finder_limits(rng):
    with pytest.raises(DimensionError):
        src.find_positive_extension(qm.random_state(rng, 2, 3))
