from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teleportsim.bellkit import BellOutcome, bell_state, conditional_spin_flip
from teleportsim.core import (HADAMARD, PAULI, DimensionError, LabelError, Mode, Operator, StateVector, apply,
                              fidelity, make_rng, measure, random_state, relabel, remove, reorder,
                              subsystem_fidelity, tensor)

S = 1 / np.sqrt(2)


def ket(*bits, labels=None):
    labels = labels or tuple(f"q{i}" for i in range(len(bits)))
    return StateVector.basis(labels, bits)


def test_tensor_basis_product():
    s = tensor(ket(0, labels=("a",)), ket(1, labels=("b",)))
    assert np.allclose(s.amps, [0, 1, 0, 0])
    assert s.labels == ("a", "b")


def test_tensor_superposition():
    plus = StateVector.from_amps([S, S], ("a",))
    s = tensor(plus, ket(0, labels=("b",)))
    assert np.allclose(s.amps, [S, 0, S, 0])


def test_tensor_rejects_duplicate_labels():
    with pytest.raises(LabelError):
        tensor(ket(0, labels=("a",)), ket(1, labels=("a",)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 3), st.integers(1, 3))
def test_tensor_preserves_norm(seed, n1, n2):
    rng = make_rng(seed)
    s1 = random_state([f"a{i}" for i in range(n1)], rng)
    s2 = random_state([f"b{i}" for i in range(n2)], rng)
    assert np.linalg.norm(tensor(s1, s2).amps) == pytest.approx(1, abs=1e-12)


def test_state_validation():
    with pytest.raises(ValueError):
        StateVector((2,), ("a",), [1, 1])
    with pytest.raises(DimensionError):
        StateVector((2, 2), ("a", "b"), [1, 0, 0])
    with pytest.raises(LabelError):
        StateVector((2, 2), ("a", "a"), [1, 0, 0, 0])


def test_apply_identity_is_noop():
    s = random_state(("a", "b"), make_rng(1))
    out = apply(Operator(("b",), np.eye(2)), s)
    assert np.allclose(out.amps, s.amps)


def test_conditional_spin_flip_on_up_up():
    out = apply(conditional_spin_flip("a", "b"), ket(0, 0, labels=("a", "b")))
    assert np.allclose(out.amps, ket(0, 1).amps)


@pytest.mark.parametrize("name", ["x", "y", "z"])
def test_apply_then_dagger_restores(name):
    s = random_state(("a", "b", "c"), make_rng(3))
    op = Operator(("b",), PAULI[name] @ HADAMARD)
    back = apply(op.dagger(), apply(op, s))
    assert np.allclose(back.amps, s.amps, atol=1e-12)


def test_apply_errors():
    s = ket(0, 0, labels=("a", "b"))
    with pytest.raises(LabelError):
        apply(Operator(("z",), np.eye(2)), s)
    with pytest.raises(DimensionError):
        apply(Operator(("a",), np.eye(4)), s)
    with pytest.raises(DimensionError):
        Operator(("a",), np.ones((2, 3)), unitary=False)
    with pytest.raises(ValueError):
        Operator(("a",), np.ones((2, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_apply_preserves_norm(seed):
    rng = make_rng(seed)
    s = random_state(("a", "b", "c"), rng)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    out = apply(Operator(("c", "a"), q), s)
    assert np.linalg.norm(out.amps) == pytest.approx(1, abs=1e-12)


def test_measure_basis_state_single_branch():
    (b,) = measure(ket(0, labels=("a",)), "a")
    assert b.outcome == 0 and b.probability == pytest.approx(1)


def test_measure_plus_two_branches():
    bs = measure(StateVector.from_amps([S, S], ("a",)), "a")
    assert [b.outcome for b in bs] == [0, 1]
    assert [b.probability for b in bs] == pytest.approx([0.5, 0.5])


def test_measure_singlet_first_qubit():
    bs = measure(bell_state(BellOutcome.PSI_MINUS, ("a", "b")), "a")
    assert [b.probability for b in bs] == pytest.approx([0.5, 0.5])
    # |up down> and -|down up>, phases included
    assert np.allclose(bs[0].state.amps, [0, 1, 0, 0])
    assert np.allclose(bs[1].state.amps, [0, 0, -1, 0])


def test_measure_rejects_bad_basis():
    with pytest.raises(ValueError):
        measure(ket(0, labels=("a",)), "a", basis=np.ones((2, 2)))
    with pytest.raises(LabelError):
        measure(ket(0, labels=("a",)), ())


def test_measure_discard_and_degenerate_outcomes():
    s = random_state(("a", "b"), make_rng(5))
    bs = measure(s, "a", discard=True)
    assert all(b.state.labels == ("b",) for b in bs)
    parity = measure(s, ("a", "b"), outcomes=(0, 1, 1, 0))
    assert sum(b.probability for b in parity) == pytest.approx(1)
    with pytest.raises(ValueError):
        measure(s, ("a", "b"), outcomes=(0, 1, 1, 0), discard=True)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_enumerate_probabilities_sum_to_one(seed):
    rng = make_rng(seed)
    s = random_state(("a", "b", "c"), rng)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    total = sum(b.probability for b in measure(s, ("c", "a"), basis=q))
    assert total == pytest.approx(1, abs=1e-10)


def test_measurement_is_projective():
    s = random_state(("a", "b"), make_rng(9))
    basis = HADAMARD
    for b in measure(s, "a", basis=basis):
        (again,) = measure(b.state, "a", basis=basis)
        assert again.outcome == b.outcome and again.probability == pytest.approx(1)


def test_sampling_matches_enumeration():
    s = random_state(("a", "b"), make_rng(11))
    exact = {b.outcome: b.probability for b in measure(s, ("a", "b"))}
    rng = make_rng(12)
    n = 10_000
    counts = dict.fromkeys(exact, 0)
    for _ in range(n):
        (b,) = measure(s, ("a", "b"), rng=rng, mode=Mode.sample(0))
        counts[b.outcome] += 1
    for k, p in exact.items():
        assert abs(counts[k] / n - p) <= 5 * np.sqrt(p * (1 - p) / n)


def test_branch_mode_and_errors():
    s = StateVector.from_amps([S, S], ("a",))
    (b,) = measure(s, "a", mode="branch:1")
    assert b.outcome == 1
    with pytest.raises(IndexError):
        measure(s, "a", mode="branch:2")
    with pytest.raises(ValueError):
        Mode("sample")


def test_fidelity_basics():
    s = random_state(("a", "b"), make_rng(2))
    assert fidelity(s, s) == pytest.approx(1)
    assert fidelity(s, StateVector(s.dims, s.labels, np.exp(0.7j) * s.amps)) == pytest.approx(1)
    assert fidelity(ket(0, labels=("a",)), ket(1, labels=("a",))) == 0
    with pytest.raises(DimensionError):
        fidelity(ket(0, labels=("a",)), ket(0, labels=("b",)))


def test_reorder_relabel_remove():
    s = random_state(("a", "b"), make_rng(4))
    r = reorder(s, ("b", "a"))
    assert np.allclose(r.tensor, s.tensor.T)
    assert relabel(s, {"a": "x"}).labels == ("x", "b")
    joint = tensor(s, ket(1, labels=("c",)))
    assert fidelity(remove(joint, "c"), s) == pytest.approx(1)
    with pytest.raises(ValueError):
        remove(bell_state("PsiMinus", ("a", "b")), "a")


def test_subsystem_fidelity_matches_fidelity_on_products():
    s = random_state(("a",), make_rng(6))
    joint = tensor(s, ket(0, labels=("junk",)))
    assert subsystem_fidelity(joint, s) == pytest.approx(1)
    assert subsystem_fidelity(bell_state("PhiPlus", ("a", "b")), ket(0, labels=("a",))) == pytest.approx(0.5)


def test_rng_is_deterministic():
    assert np.array_equal(make_rng(42).random(5), make_rng(42).random(5))
    assert not np.array_equal(make_rng(42).random(5), make_rng(43).random(5))


def test_json_round_trip():
    s = random_state(("a", "b"), make_rng(8))
    assert np.array_equal(StateVector.from_json(s.to_json()).amps, s.amps)
