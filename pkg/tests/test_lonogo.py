from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teleportsim.bellkit import BELL_ORDER, BellOutcome
from teleportsim.core import make_rng
from teleportsim.lonogo import (EvolutionError, LinearEvolution, Statistics, amplitude_matrix, certify_no_perfect,
                                detection_distribution, diagonal_coefficients, discrimination_success,
                                evolution_from_params, evolve_bell, identity_scheme, optimize_discrimination,
                                patterns, single_scheme)
from teleportsim.lonogo import _mask, _soft_objective

S = 1 / np.sqrt(2)
PSI_M, PSI_P, PHI_M, PHI_P = BELL_ORDER


def fs(*m):
    return frozenset(m)


def nonzero(d):
    return {k: v for k, v in d.items() if abs(v) > 1e-12}


def random_evolution(seed, n, stat):
    return evolution_from_params(make_rng(seed).normal(scale=np.pi, size=n * n), n, stat)


def test_boson_single_scheme_psi_minus():
    amps = nonzero(evolve_bell(single_scheme(), "boson", PSI_M))
    assert amps.keys() == {fs(2, 3), fs(1, 4)}
    assert amps[fs(2, 3)] == pytest.approx(S)
    assert amps[fs(1, 4)] == pytest.approx(-S)


def test_boson_single_scheme_distributions():
    ev = single_scheme()
    assert detection_distribution(ev, "boson", PSI_M) == pytest.approx({fs(2, 3): 0.5, fs(1, 4): 0.5})
    assert detection_distribution(ev, "boson", PHI_M) == pytest.approx({fs(i): 0.25 for i in range(1, 5)})


# direct antisymmetrised expansion (see the ledger for the label discussion)
FERMION_AMPS = {
    PSI_M: {fs(1, 2): S, fs(3, 4): -S},
    PSI_P: {fs(1, 4): -S, fs(2, 3): -S},
    PHI_M: {fs(1, 3): -S, fs(2, 4): S},
    PHI_P: {fs(1, 3): -S, fs(2, 4): -S},
}


@pytest.mark.parametrize("kind", BELL_ORDER)
def test_fermion_single_scheme_amplitudes(kind):
    got = nonzero(evolve_bell(single_scheme(), "fermion", kind))
    assert got.keys() == FERMION_AMPS[kind].keys()
    for p, a in FERMION_AMPS[kind].items():
        assert got[p] == pytest.approx(a, abs=1e-12)


def test_fermion_diagonal_patterns_absent():
    assert all(i != j for i, j in patterns(6, Statistics.FERMION))
    ev = random_evolution(3, 6, "fermion")
    assert np.all(np.abs(amplitude_matrix(ev, "fermion")) <= 1)


def test_identity_scheme_distinguishable():
    ev = identity_scheme()
    assert detection_distribution(ev, "distinguishable", PSI_P) == pytest.approx({(1, 4): 0.5, (2, 3): 0.5})
    rep = discrimination_success(ev, "distinguishable")
    assert rep.success == 0
    psis, phis = fs(PSI_M, PSI_P), fs(PHI_M, PHI_P)
    assert rep.classes() == {psis: {(1, 4), (2, 3)}, phis: {(1, 3), (2, 4)}}


@pytest.mark.parametrize("stat", ["boson", "fermion"])
def test_single_scheme_success_half(stat):
    rep = discrimination_success(single_scheme(), stat)
    assert rep.success == pytest.approx(0.5, abs=1e-12)
    phis = fs(PHI_M, PHI_P)
    assert phis in rep.classes()


def test_boson_partition_merges_phis_on_diagonal():
    rep = discrimination_success(single_scheme(), "boson")
    assert rep.classes()[fs(PHI_M, PHI_P)] == {fs(i) for i in range(1, 5)}


def test_fermion_phis_merge_on_13_24():
    rep = discrimination_success(single_scheme(), "fermion")
    assert rep.classes()[fs(PHI_M, PHI_P)] == {fs(1, 3), fs(2, 4)}
    assert rep.identified() == {PSI_M: {fs(1, 2), fs(3, 4)}, PSI_P: {fs(1, 4), fs(2, 3)}}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(list(Statistics)), st.sampled_from([4, 6, 8]))
def test_total_probability_is_one(seed, stat, n):
    ev = random_evolution(seed, n, stat)
    p = np.abs(amplitude_matrix(ev, stat)) ** 2
    assert np.allclose(p.sum(axis=1), 1, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_boson_diagonal_amplitudes_follow_coefficient_law(seed):
    ev = random_evolution(seed, 6, "boson")
    amp = amplitude_matrix(ev, "boson")
    diag = [k for k, (i, j) in enumerate(patterns(6, Statistics.BOSON)) if i == j]
    assert np.allclose(amp[:, diag], diagonal_coefficients(ev), atol=1e-12)


def test_fermion_antisymmetry_under_mode_transposition():
    ev = random_evolution(11, 6, "fermion")
    swapped = ev.permuted([1, 0, 2, 3, 4, 5])
    for kind in BELL_ORDER:
        a = evolve_bell(ev, "fermion", kind)[fs(1, 2)]
        b = evolve_bell(swapped, "fermion", kind)[fs(1, 2)]
        assert b == pytest.approx(-a, abs=1e-12)


@pytest.mark.parametrize("stat", list(Statistics))
def test_success_invariant_under_mode_relabeling(stat):
    ev = random_evolution(5, 6, stat) if stat is not Statistics.DISTINGUISHABLE else identity_scheme(6)
    perm = [2, 0, 1, 5, 3, 4]  # keeps the two halves apart
    assert discrimination_success(ev.permuted(perm), stat).success == pytest.approx(
        discrimination_success(ev, stat).success, abs=1e-12)


def test_distinguishable_diagonal_coefficients_vanish():
    rng = make_rng(2)
    for n in (4, 6, 8):
        for _ in range(50):
            ev = evolution_from_params(rng.normal(size=n * n), n, "distinguishable")
            assert np.abs(diagonal_coefficients(ev)).max() <= 1e-12


def test_evolution_validation():
    with pytest.raises(EvolutionError):
        LinearEvolution(np.ones(4), np.ones(4), np.ones(4), np.ones(4)).check("boson")
    with pytest.raises(EvolutionError):
        single_scheme().check("distinguishable")
    with pytest.raises(EvolutionError):
        LinearEvolution(np.ones(3), np.ones(3), np.ones(3), np.ones(3))


def test_evolution_json_round_trip():
    ev = random_evolution(1, 6, "boson")
    back = LinearEvolution.from_json(ev.to_json())
    assert np.array_equal(back.rows, ev.rows)


@pytest.mark.parametrize("stat", list(Statistics))
def test_soft_objective_gradient_matches_finite_differences(stat):
    n = 6
    theta = make_rng(1).normal(size=n * n)
    mask = _mask(n, stat)
    f, g = _soft_objective(theta, n, stat, mask, 0.05)
    h = 1e-6
    fd = np.array([(_soft_objective(theta + h * e, n, stat, mask, 0.05)[0]
                    - _soft_objective(theta - h * e, n, stat, mask, 0.05)[0]) / (2 * h) for e in np.eye(n * n)])
    assert np.max(np.abs(fd - g)) < 1e-7


def test_optimizer_recovers_boson_feasible_point():
    res = optimize_discrimination("boson", 4, restarts=10, seed=3)
    assert res.report.success >= 0.5 - 1e-9


def test_optimizer_is_deterministic():
    a = optimize_discrimination("fermion", 6, restarts=3, seed=17)
    b = optimize_discrimination("fermion", 6, restarts=3, seed=17)
    assert a.trace == b.trace
    assert a.report.success == b.report.success


def test_optimizer_scores_stay_in_unit_interval():
    res = optimize_discrimination("fermion", 6, restarts=20, seed=8)
    assert all(0 <= hard <= 1 for *_, hard in res.trace)
    assert res.report.success <= 0.5 + 1e-6


@pytest.mark.parametrize("stat, n, restarts", [("distinguishable", 6, 20), ("boson", 8, 10)])
def test_certificates_show_gap(stat, n, restarts):
    cert = certify_no_perfect(stat, n, restarts, seed=4)
    assert cert["gap_to_one"] >= 0.49
    assert cert["seed"] == 4 and cert["restarts"] == restarts and cert["n_modes"] == n


@pytest.mark.parametrize("args", [("boson", 3, 1, 0), ("boson", 6, 0, 0), ("distinguishable", 5, 1, 0)])
def test_optimizer_rejects_bad_sizes(args):
    with pytest.raises(ValueError):
        optimize_discrimination(*args)


def test_bell_outcome_labels_are_strings():
    assert str(BellOutcome.PSI_MINUS) == "PsiMinus"
