"""Built-in acceptance suite shared by `teleportsim verify` and the test suite.

Each check returns a CheckResult whose `artifact` is the canonical text of
every report it produced; the determinism check re-runs the others and
compares artifacts byte for byte.
"""
from __future__ import annotations

import json
import time
import tracemalloc
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bellkit import BellOutcome, bell_measure
from .core import StateVector, fidelity, make_rng, random_state
from .cvteleport import (Grid1D, WaveFunction, cv_crossed_swap, cv_teleport_oneway, gaussian, probe_couple,
                         probe_state)
from .lonogo import (Statistics, certify_no_perfect, diagonal_coefficients, discrimination_success,
                     evolution_from_params, single_scheme)
from .teleport import (ProtocolSchedule, bbcjpw_teleport, cavity_channel_steps, cavity_pair_channel,
                       cavity_swap, cavity_teleport, crossed_swap_qubits, random_payloads)

SEED = 20240611
PRINTED_SWAP_TABLE = {(0, 0): "y", (2, 0): "x", (0, 2): "z", (2, 2): "none"}


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    details: list[str]
    elapsed: float
    artifact: str = field(default="", repr=False)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.title} ({self.elapsed:.2f} s) - {'; '.join(self.details)}"


class _Check:
    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.ok = True
        self.details: list[str] = []
        self.artifacts: list[str] = []

    def require(self, cond: bool, what: str) -> None:
        self.ok &= bool(cond)
        self.details.append(("ok " if cond else "FAILED ") + what)

    def keep(self, text: str) -> None:
        self.artifacts.append(text)


def _timed(number: int, title: str, budget: float):
    def wrap(fn: Callable[[_Check], None]) -> Callable[[], CheckResult]:
        def run() -> CheckResult:
            chk = _Check(number, title, budget)
            t0 = time.perf_counter()
            fn(chk)
            elapsed = time.perf_counter() - t0
            chk.require(elapsed < budget, f"runtime {elapsed:.1f} s < {budget:g} s")
            return CheckResult(number, title, chk.ok, chk.details, elapsed, "\n".join(chk.artifacts))
        run.number = number
        return run
    return wrap


def _minmax(xs) -> tuple[float, float]:
    xs = list(xs)
    return min(xs), max(xs)


@_timed(1, "BBCJPW teleportation", 10)
def check_bbcjpw(c: _Check) -> None:
    payloads = random_payloads(("in",), 100, SEED, entangled_every=4)
    fids, probs, rules = [], [], set()
    for s in payloads:
        rep = bbcjpw_teleport(s, "in", "interaction", "enumerate")
        fids += [b.fidelity_post for b in rep.branches]
        probs += [b.probability for b in rep.branches]
        rules.add(json.dumps({str(k): v for k, v in rep.corrections.items()}, sort_keys=True))
        c.keep(rep.to_json())
    n_ent = sum(len(s.labels) > 1 for s in payloads)
    c.require(n_ent == 25, f"{n_ent} of 100 payloads entangled with a reference")
    c.require(min(fids) >= 1 - 1e-10, f"min corrected fidelity {min(fids):.15f}")
    lo, hi = _minmax(probs)
    c.require(abs(lo - 0.25) <= 1e-10 and abs(hi - 0.25) <= 1e-10, f"branch probabilities in [{lo!r}, {hi!r}]")
    rule = json.loads(next(iter(rules)))
    c.require(len(rules) == 1 and rule.get(str(BellOutcome.PSI_MINUS)) == "none",
              f"correction rule {rule}")


@_timed(2, "Bell-strategy equivalence", 10)
def check_bell_strategies(c: _Check) -> None:
    rng = make_rng(SEED + 2)
    worst_p, worst_f = 0.0, 1.0
    for i in range(100):
        labels = ("a", "b", "ref") if i % 2 else ("a", "b")
        s = random_state(labels, rng)
        direct = {b.outcome: b for b in bell_measure(s, "a", "b", "interaction")}
        anc = {b.outcome: b for b in bell_measure(s, "a", "b", "ancilla")}
        if set(direct) != set(anc):
            worst_p = np.inf
            continue
        for k, b in direct.items():
            worst_p = max(worst_p, abs(b.probability - anc[k].probability))
            worst_f = min(worst_f, fidelity(b.state, anc[k].state))
        c.keep(repr(sorted((str(k), b.probability) for k, b in anc.items())))
    c.require(worst_p <= 1e-10, f"max probability difference {worst_p:.3g}")
    c.require(worst_f >= 1 - 1e-10, f"min post-state fidelity {worst_f:.15f}")


def _fs(*modes: int) -> frozenset:
    return frozenset(modes)


@_timed(3, "boson two-of-four analyzer", 1)
def check_boson_analyzer(c: _Check) -> None:
    rep = discrimination_success(single_scheme(), Statistics.BOSON)
    c.keep(repr((rep.success, sorted((sorted(p), sorted(map(str, s))) for p, s in rep.partition.items()))))
    c.require(abs(rep.success - 0.5) <= 1e-12, f"success {rep.success!r}")
    ident = rep.identified()
    want = {BellOutcome.PSI_MINUS: {_fs(2, 3), _fs(1, 4)}, BellOutcome.PSI_PLUS: {_fs(1, 2), _fs(3, 4)}}
    c.require(ident == want, "outcome map {2,3},{1,4} -> PsiMinus and {1,2},{3,4} -> PsiPlus")
    phis = frozenset((BellOutcome.PHI_MINUS, BellOutcome.PHI_PLUS))
    diag = {p: s for p, s in rep.partition.items() if len(p) == 1}
    c.require(len(diag) == 4 and all(s == phis for s in diag.values()),
              "every diagonal pattern is consistent with both Phi states")


@_timed(4, "fermion two-of-four scheme", 1)
def check_fermion_analyzer(c: _Check) -> None:
    rep = discrimination_success(single_scheme(), Statistics.FERMION)
    c.keep(repr((rep.success, sorted((sorted(p), sorted(map(str, s))) for p, s in rep.partition.items()))))
    ident = rep.identified()
    c.require(set(ident) == {BellOutcome.PSI_MINUS, BellOutcome.PSI_PLUS}, "both Psi states uniquely identified")
    phis = frozenset((BellOutcome.PHI_MINUS, BellOutcome.PHI_PLUS))
    c.require(rep.classes().get(phis) == {_fs(1, 3), _fs(2, 4)}, "Phi states merge on {1,3},{2,4}")
    c.require(abs(rep.success - 0.5) <= 1e-12, f"success {rep.success!r}")
    on_12 = [str(k) for k, ps in ident.items() if _fs(1, 2) in ps]
    c.details.append(f"recorded: {{1,2}},{{3,4}} signal {'/'.join(on_12)} under antisymmetrized expansion")


@_timed(5, "no-go certification (N=6, 200 restarts)", 300)
def check_no_go(c: _Check) -> None:
    for st in Statistics:
        cert = certify_no_perfect(st, 6, 200, SEED)
        c.keep(json.dumps(cert))
        m = cert["max_success"]
        c.require(m <= 0.5 + 1e-6, f"{st.value} max_success {m!r} <= 0.5+1e-6")
        if st is not Statistics.DISTINGUISHABLE:
            c.require(m >= 0.5 - 1e-9, f"{st.value} feasible point recovered")
        c.require(cert["gap_to_one"] >= 0.49, f"{st.value} gap_to_one {cert['gap_to_one']:.6f}")


@_timed(6, "diagonal-coefficient law", 5)
def check_diagonal_law(c: _Check) -> None:
    rng = make_rng(SEED + 6)
    worst = 0.0
    for i in range(1000):
        n = (4, 6, 8)[i % 3]
        ev = evolution_from_params(rng.normal(scale=np.pi, size=n * n), n, Statistics.DISTINGUISHABLE)
        ev.check(Statistics.DISTINGUISHABLE)
        worst = max(worst, float(np.abs(diagonal_coefficients(ev)).max()))
    c.keep(repr(worst))
    c.require(worst <= 1e-12, f"max |alpha_ii..delta_ii| = {worst:.3g}")


@_timed(7, "crossed qubit swap", 30)
def check_crossed_swap(c: _Check) -> None:
    payloads = random_payloads(("q1", "q2"), 100, SEED + 7, entangled_every=4)
    probs, fids, tables = [], [], set()
    for s in payloads:
        rep = crossed_swap_qubits(s, mode="enumerate")
        c.keep(rep.to_json())
        outcomes = sorted(tuple(b.outcome) for b in rep.branches)
        probs += [b.probability for b in rep.branches] if outcomes == sorted(PRINTED_SWAP_TABLE) else [np.nan]
        fids += [b.fidelity_post for b in rep.branches]
        tables.add(tuple(sorted(rep.corrections.items())))
    lo, hi = _minmax(probs)
    c.require(abs(lo - 0.25) <= 1e-10 and abs(hi - 0.25) <= 1e-10,
              f"four (Z,X) outcomes, probabilities in [{lo!r}, {hi!r}]")
    c.require(min(fids) >= 1 - 1e-10, f"min swap fidelity {min(fids):.15f}")
    table = dict(next(iter(tables)))
    c.require(len(tables) == 1 and table == PRINTED_SWAP_TABLE,
              f"correction table {table} vs printed {PRINTED_SWAP_TABLE}")


@_timed(8, "cavity pipelines", 60)
def check_cavity(c: _Check) -> None:
    s2 = 1 / np.sqrt(2)
    want = np.array([0, s2, s2, 0])
    ((_, _, fig3),) = ProtocolSchedule(cavity_channel_steps("atom", "cavity"), ()).execute(StateVector.empty())
    pair = cavity_pair_channel()
    err = max(np.abs(fig3.amps - want).max(), np.abs(pair.amps - want).max())
    c.require(err <= 1e-10, f"channel states (|01>+|10>)/sqrt2 within {err:.2g}")
    fids = []
    for s in random_payloads(("atom",), 20, SEED + 8):
        rep = cavity_teleport(s, "atom")
        fids += [b.fidelity_post for b in rep.branches]
        c.keep(rep.to_json())
    for s in random_payloads(("atom1", "atom2"), 20, SEED + 9):
        rep = cavity_swap(s)
        fids += [b.fidelity_post for b in rep.branches]
        c.keep(rep.to_json())
    c.require(min(fids) >= 1 - 1e-10, f"ideal gates: min branch fidelity {min(fids):.15f}")
    noisy = [cavity_teleport(s, "atom", gate_error=0.05) for s in random_payloads(("atom",), 20, SEED + 10)]
    for rep in noisy:
        c.keep(rep.to_json())
    mean = float(np.mean([rep.mean_fidelity for rep in noisy]))
    c.require(0.9 < mean < 1, f"gate_error 0.05 rad: mean fidelity {mean:.6f}")


def _oneway_grid() -> Grid1D:
    return Grid1D.symmetric(256, 12.0)


@_timed(9, "CV one-way teleportation", 120)
def check_cv_oneway(c: _Check) -> None:
    g = _oneway_grid()
    psi = gaussian(g, "in")
    rep = cv_teleport_oneway(psi, 3.0, f"sample:{SEED}", trials=200)
    c.keep(rep.to_json())
    worst = min(b.extra["oracle_overlap"] for b in rep.branches)
    c.require(len(rep.branches) == 200 and worst >= 0.99, f"min oracle overlap over 200 branches {worst:.6f}")
    c.require(rep.mean_fidelity >= 0.98, f"mean corrected fidelity {rep.mean_fidelity:.6f}")
    sweep = [cv_teleport_oneway(psi, r, "enumerate").mean_fidelity for r in (0.5, 1, 2, 3)]
    c.keep(repr(sweep))
    c.require(all(x < y for x, y in zip(sweep, sweep[1:])),
              "strictly increasing over r: " + ", ".join(f"{f:.5f}" for f in sweep))


@_timed(10, "CV crossed swap", 300)
def check_cv_crossed(c: _Check) -> None:
    g = Grid1D.symmetric(48, 7.0)
    psi1, psi2 = gaussian(g, "q1", 2.0), gaussian(g, "q2", -2.0)
    tracemalloc.start()
    try:
        rep = cv_crossed_swap(psi1, psi2, "enumerate", probe_width=2 * g.dx)
        peak = tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()
    c.keep(rep.to_json())
    p = np.array([b.probability for b in rep.branches])
    for k in (1, 2):
        f = float(p @ np.array([b.extra[f"fidelity_{k}"] for b in rep.branches]) / p.sum())
        c.require(f >= 0.95, f"direction {k} corrected swap fidelity {f:.6f}")
    s = WaveFunction.from_unit(("q1", "q2", "A"), g, np.einsum(
        "i,j,k->ijk", psi1.unit, psi2.unit, probe_state(g, "A", 2 * g.dx).unit))
    s = probe_couple(probe_couple(s, "q1", "A", "q", +1), "q2", "A", "q", -1)
    want = psi1.mean("q1") - psi2.mean("q2")
    got = s.mean("A")
    c.keep(repr(got))
    c.require(abs(got - want) <= 2 * g.dx, f"probe-A mean {got:.4f} vs <q1>-<q2> = {want:.4f}")
    c.require(peak < 1 << 30, f"peak traced memory {peak / 2**20:.0f} MiB < 1024 MiB")


CHECKS = [check_bbcjpw, check_bell_strategies, check_boson_analyzer, check_fermion_analyzer, check_no_go,
          check_diagonal_law, check_crossed_swap, check_cavity, check_cv_oneway, check_cv_crossed]


def check_determinism(first: dict[int, CheckResult], numbers=None) -> CheckResult:
    """Criterion 11: re-run the given checks and compare artifacts byte for byte."""
    t0 = time.perf_counter()
    numbers = sorted(first) if numbers is None else list(numbers)
    details, ok = [], True
    by_number = {chk.number: chk for chk in CHECKS}
    for n in numbers:
        again = by_number[n]()
        same = again.artifact == first[n].artifact and bool(first[n].artifact)
        ok &= same
        details.append(f"{'ok' if same else 'FAILED'} criterion {n} byte-identical")
    return CheckResult(11, "determinism", ok, details, time.perf_counter() - t0)


def run_all(numbers=None, echo: Callable[[str], None] | None = None) -> list[CheckResult]:
    selected = [chk for chk in CHECKS if numbers is None or chk.number in numbers]
    results = []
    for chk in selected:
        res = chk()
        results.append(res)
        if echo:
            echo(res.line())
    if numbers is None or 11 in numbers:
        res = check_determinism({r.number: r for r in results})
        results.append(res)
        if echo:
            echo(res.line())
    return results
