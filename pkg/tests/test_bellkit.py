from __future__ import annotations

import numpy as np
import pytest

from teleportsim.bellkit import (BELL_ORDER, PARITY_TABLE, BellOutcome, bell_matrix, bell_measure,
                                 bell_measure_ancilla, bell_measure_interaction, bell_state,
                                 conditional_phase_flip, conditional_spin_flip, derive_parity_table,
                                 parity_measure, same_or_different)
from teleportsim.core import HADAMARD, StateVector, apply, fidelity, make_rng, random_state, tensor

S = 1 / np.sqrt(2)
UP, DOWN = np.array([1, 0]), np.array([0, 1])


def test_bell_state_amplitudes():
    assert np.allclose(bell_state("PsiMinus").amps, [0, S, -S, 0])
    assert np.allclose(bell_state("PhiPlus").amps, [S, 0, 0, S])
    assert abs(np.vdot(bell_state("PsiMinus").amps, bell_state("PhiPlus").amps)) < 1e-15


def test_bell_basis_is_orthonormal():
    m = bell_matrix()
    assert np.allclose(m.conj().T @ m, np.eye(4), atol=1e-12)


@pytest.mark.parametrize("bits, image", [((0, 0), (0, 1)), ((0, 1), (0, 0)), ((1, 0), (1, 0)), ((1, 1), (1, 1))])
def test_conditional_spin_flip_rule(bits, image):
    out = apply(conditional_spin_flip("1", "2"), StateVector.basis(("1", "2"), bits))
    assert np.allclose(out.amps, StateVector.basis(("1", "2"), image).amps)


def test_conditional_spin_flip_is_involution():
    m = conditional_spin_flip().matrix
    assert np.allclose(m @ m, np.eye(4))


def test_conditional_phase_flip_rule():
    m = conditional_phase_flip().matrix
    assert np.allclose(m @ [0, 1, 0, 0], [0, -1, 0, 0])
    assert np.allclose(m @ [0, 0, 1, 0], [0, 0, 1, 0])


def test_phase_flip_is_spin_flip_in_rotated_basis():
    h2 = np.kron(np.eye(2), HADAMARD)
    assert np.allclose(h2 @ conditional_spin_flip().matrix @ h2, conditional_phase_flip().matrix, atol=1e-12)


# Bell state -> product state after the conditional spin flip
PRODUCTS = {
    BellOutcome.PSI_MINUS: np.kron((UP - DOWN) * S, UP),
    BellOutcome.PSI_PLUS: np.kron((UP + DOWN) * S, UP),
    BellOutcome.PHI_MINUS: np.kron((UP - DOWN) * S, DOWN),
    BellOutcome.PHI_PLUS: np.kron((UP + DOWN) * S, DOWN),
}


@pytest.mark.parametrize("kind", BELL_ORDER)
def test_spin_flip_maps_bell_states_to_products(kind):
    out = apply(conditional_spin_flip("1", "2"), bell_state(kind))
    assert np.allclose(out.amps, PRODUCTS[kind], atol=1e-12)


@pytest.mark.parametrize("kind", BELL_ORDER)
@pytest.mark.parametrize("strategy", ["interaction", "ancilla"])
def test_bell_input_is_recognised(kind, strategy):
    (b,) = bell_measure(bell_state(kind, ("a", "b")), "a", "b", strategy)
    assert b.outcome is kind and b.probability == pytest.approx(1)


def test_superposition_splits_evenly():
    s = StateVector.from_amps(bell_state("PsiMinus").amps + bell_state("PhiPlus").amps, ("a", "b"), normalize=True)
    got = {b.outcome: b.probability for b in bell_measure_interaction(s, "a", "b")}
    assert got == pytest.approx({BellOutcome.PSI_MINUS: 0.5, BellOutcome.PHI_PLUS: 0.5})


def test_non_qubit_targets_rejected():
    s = StateVector.from_amps([1, 0, 0, 0, 0, 0], ("a", "b"), dims=(3, 2))
    with pytest.raises(ValueError):
        bell_measure_interaction(s, "a", "b")


@pytest.mark.parametrize("via", ["direct", "singlet_ancilla"])
def test_parity_examples(via):
    (b,) = parity_measure(StateVector.basis(("a", "b"), (0, 1)), "a", "b", "z", via)
    assert b.outcome == 0 and b.probability == pytest.approx(1)
    (b,) = parity_measure(bell_state("PhiPlus", ("a", "b")), "a", "b", "z", via)
    assert b.outcome == 2


def test_parity_rejects_bad_axis():
    with pytest.raises(ValueError):
        parity_measure(bell_state("PhiPlus", ("a", "b")), "a", "b", "y")


@pytest.mark.parametrize("axis", ["z", "x"])
def test_parity_routes_agree(axis):
    rng = make_rng(77)
    for i in range(100):
        s = random_state(("a", "b", "spec") if i % 2 else ("a", "b"), rng)
        direct = {b.outcome: b for b in parity_measure(s, "a", "b", axis, "direct")}
        anc = {b.outcome: b for b in parity_measure(s, "a", "b", axis, "singlet_ancilla")}
        assert set(direct) == set(anc)
        for k in direct:
            assert abs(direct[k].probability - anc[k].probability) < 1e-10
            assert fidelity(direct[k].state, anc[k].state) > 1 - 1e-10


def test_ancilla_labels_never_leak():
    s = random_state(("a", "b"), make_rng(1))
    for b in parity_measure(s, "a", "b", "z", "singlet_ancilla"):
        assert b.state.labels == ("a", "b")


def test_parity_table_regression():
    assert derive_parity_table() == PARITY_TABLE
    assert PARITY_TABLE[0, 0] is BellOutcome.PSI_MINUS
    assert PARITY_TABLE[2, 2] is BellOutcome.PHI_PLUS
    assert len(set(PARITY_TABLE.values())) == 4


@pytest.mark.parametrize("kind", BELL_ORDER)
def test_parities_commute_on_bell_states(kind):
    s = bell_state(kind, ("a", "b"))
    zx = [(bz.outcome, bx.outcome) for bz in parity_measure(s, "a", "b", "z")
          for bx in parity_measure(bz.state, "a", "b", "x")]
    xz = [(bz.outcome, bx.outcome) for bx in parity_measure(s, "a", "b", "x")
          for bz in parity_measure(bx.state, "a", "b", "z")]
    assert zx == xz


def test_strategies_agree_with_spectators():
    rng = make_rng(5)
    for _ in range(20):
        s = random_state(("a", "b", "r1", "r2"), rng)
        direct = {b.outcome: b for b in bell_measure_interaction(s, "a", "b")}
        anc = {b.outcome: b for b in bell_measure_ancilla(s, "a", "b")}
        for k in direct:
            assert direct[k].probability == pytest.approx(anc[k].probability, abs=1e-10)
            assert fidelity(direct[k].state, anc[k].state) > 1 - 1e-10


def test_same_or_different():
    assert same_or_different(0, 0) == same_or_different(1, 1) == 0
    assert same_or_different(0, 1) == same_or_different(1, 0) == 2


def test_sampled_bell_measurement_is_seeded():
    s = tensor(random_state(("a",), make_rng(1)), random_state(("b",), make_rng(2)))
    picks = [bell_measure(s, "a", "b", mode="sample:9")[0].outcome for _ in range(3)]
    assert len(set(picks)) == 1
