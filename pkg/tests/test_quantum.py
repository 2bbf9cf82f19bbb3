import math

import numpy as np
import pytest

from bellgap import quantum as qm
from bellgap.errors import ContractError, DimensionError, ParseError
from bellgap.scenario import event_prob, moment

from oracles import SX, SZ, SINGLET_120_SLACK, singlet_matrix, werner_correlation_formula


def test_density_operator_validation():
    with pytest.raises(ContractError):
        qm.DensityOperator(np.eye(4), (2, 2))
    with pytest.raises(ContractError):
        qm.DensityOperator(np.diag([1.5, -0.5, 0, 0]), (2, 2))
    with pytest.raises(DimensionError):
        qm.DensityOperator(np.eye(4) / 4, (2, 3))


def test_state_json_roundtrip(rng):
    rho = qm.random_state(rng, 2, 3)
    back = qm.DensityOperator.from_json(rho.to_json())
    assert np.array_equal(back.matrix, rho.matrix) and back.dims == (2, 3)
    with pytest.raises(ParseError):
        qm.DensityOperator.from_json({"dims": [2, 2]})


def test_singlet_matches_oracle():
    assert np.allclose(qm.singlet().matrix, singlet_matrix())


def test_singlet_correlation_is_minus_dot():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a, b = (v / np.linalg.norm(v) for v in rng.normal(size=(2, 3)))
        c = qm.correlation(qm.singlet(), qm.spin_observable(a), qm.spin_observable(b))
        assert c == pytest.approx(-a @ b, abs=1e-12)


def test_singlet_120_degree_configuration():
    t = 2 * math.pi / 3
    b2 = (math.sin(t), 0.0, math.cos(t))
    slack = qm.quantum_bell_slack(qm.singlet(), SZ, SZ, qm.spin_observable(b2))
    assert slack == pytest.approx(SINGLET_120_SLACK, abs=1e-12)


def test_povm_validation():
    with pytest.raises(ContractError):
        qm.Povm((-1, 1), [np.eye(2), np.eye(2)])
    with pytest.raises(ContractError):
        qm.Povm((-1, 1), [np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])])
    with pytest.raises(DimensionError):
        qm.Povm((-1, 0, 1), [np.eye(2) / 2, np.eye(2) / 2])


def test_observable_spectrum_check():
    with pytest.raises(ContractError):
        qm.ObservableOp(2 * SZ)


def test_projective_povm_merges_degenerate_eigenvalues():
    m = qm.projective_povm(np.diag([1.0, -1.0, -1.0]))
    assert m.grid == (-1.0, 1.0)
    assert np.allclose(qm.observable_from_povm(m).matrix, np.diag([1, -1, -1]))


def test_quantum_joint_mean_equals_correlation(rng):
    rho = qm.random_state(rng, 3, 3)
    a = qm.random_observable(rng, 3, dichotomic=True)
    b = qm.random_observable(rng, 3, dichotomic=True)
    p = qm.quantum_joint(rho, qm.projective_povm(a), qm.projective_povm(b))
    assert moment(p, 1, 1) == pytest.approx(qm.correlation(rho, a, b), abs=1e-12)
    # general spectra: outcome values are rounded to 10 decimals
    a = qm.random_observable(rng, 3)
    b = qm.random_observable(rng, 3)
    p = qm.quantum_joint(rho, qm.projective_povm(a), qm.projective_povm(b))
    assert moment(p, 1, 1) == pytest.approx(qm.correlation(rho, a, b), abs=1e-10)


def test_same_projective_measurement_on_symmetric_product():
    phi = qm.ket(1, 1j)
    rho = qm.pure_state(np.kron(phi, phi), (2, 2))
    m = qm.projective_povm(SX)
    p = qm.quantum_joint(rho, m, m)
    assert p.probs.sum() == pytest.approx(1.0)
    assert event_prob(p, "eq") == pytest.approx(0.5)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_werner_state_properties(d):
    for phi in (-1.0, -0.3, 0.0, 0.5, 1.0):
        w = qm.werner_state(d, phi)
        v = np.array(qm.symmetric_projectors(d)[0] - qm.symmetric_projectors(d)[1])
        assert np.trace(w.matrix @ v).real == pytest.approx(phi, abs=1e-12)
        assert np.allclose(w.reduced(1), np.eye(d) / d)
    with pytest.raises(ContractError):
        qm.werner_state(2, 1.5)


def test_werner_qubit_spin_correlation():
    for phi in (-1.0, 0.0, 0.4, 1.0):
        c = qm.correlation(qm.werner_state(2, phi), SZ, SZ)
        assert c == pytest.approx(werner_correlation_formula(phi), abs=1e-12)


def test_noisy_state_range():
    ns = qm.noisy_state(qm.singlet_vector(), 0.2)
    assert ns.gamma == pytest.approx(1.0)
    assert ns.beta_max == pytest.approx(1 / 3)
    with pytest.raises(ContractError):
        qm.noisy_singlet(0.5)
    assert qm.noisy_singlet(0.5, force=True).dims == (2, 2)
    prod = qm.noisy_state(np.kron([1, 0], [1, 0]), 0.0)
    assert prod.gamma == pytest.approx(2.0)
    assert prod.beta_max == pytest.approx(1 / 17)


def test_conditional_outcome_probs():
    out = qm.conditional_outcome_probs(0.2, (0.0, 1.0, 0.0))
    assert out["same"] == pytest.approx(0.4, abs=1e-12)
    assert out["different"] == pytest.approx(0.6, abs=1e-12)
    with pytest.raises(ContractError):
        qm.conditional_outcome_probs(0.5, (0, 0, 1))


def test_noisy_povm_mean():
    m = qm.noisy_povm(SZ, 0.25)
    assert np.allclose(qm.observable_from_povm(m).matrix, 0.75 * SZ)


def test_chsh_tsirelson_on_singlet():
    s = 1 / math.sqrt(2)
    val = qm.chsh(qm.singlet(), SZ, SX, -s * (SZ + SX), -s * (SZ - SX))
    assert val == pytest.approx(2 * math.sqrt(2), abs=1e-12)


def test_haar_unitary_and_random_objects(rng):
    u = qm.haar_unitary(rng, 4, size=3)
    assert np.allclose(u @ np.conj(np.swapaxes(u, -1, -2)), np.eye(4), atol=1e-12)
    e = qm.random_dichotomic_povm(rng, 3)
    assert e.grid == (-1.0, 1.0)
    a = qm.random_observable(rng, 3, dichotomic=True)
    assert np.allclose(a.matrix @ a.matrix, np.eye(3), atol=1e-12)


def test_slack_needs_equal_dims(rng):
    rho = qm.random_state(rng, 2, 3)
    with pytest.raises(DimensionError):
        qm.quantum_bell_slack(rho, SZ, np.eye(3), np.eye(3))
