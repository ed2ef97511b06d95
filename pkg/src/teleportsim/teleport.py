"""Discrete-variable teleportation protocols.

Every protocol is written as a `ProtocolSchedule`: a flat list of steps
(preparations, gates, measurements) that is executed with full branch
enumeration. A `Protocol` adds what happens afterwards: which subsystem ends up
carrying which payload, how raw readings collapse into the announced outcome,
and any fixed operations left for the correction stage. Per-outcome Pauli
corrections are never hand-written; `derive_corrections` finds them by running
the protocol on probe payloads.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from .bellkit import (BELL_ORDER, BellOutcome, bell_measure, bell_state, same_or_different,
                      singlet_coupling)
from .core import (PAULI, MeasurementBranch, Mode, Operator, StateVector, apply, apply_all,
                   fidelity, make_rng, measure, random_state, relabel, remove, subsystem_fidelity,
                   tensor, tensor_all)

CORRECTION_TOL = 1e-9
PAULI_NAMES = ("none", "x", "y", "z")


class ProtocolInconsistencyError(RuntimeError):
    """Some outcome cannot be repaired by local pi rotations."""


class ScheduleError(ValueError):
    """A schedule reads an outcome it never measured or breaks its time order."""


# --- schedules ---------------------------------------------------------------

@dataclass(frozen=True)
class Prepare:
    state: StateVector
    time: int = 0


@dataclass(frozen=True)
class Gate:
    op: Operator
    time: int = 0


@dataclass(frozen=True)
class Discard:
    """Drop subsystems that are known to be left in `vector` (default: |0...0>)."""
    labels: tuple[str, ...]
    vector: Any = None
    time: int = 0


@dataclass(frozen=True)
class Measure:
    name: str
    target: str
    basis: Any = None
    outcomes: tuple | None = None
    time: int = 0


@dataclass(frozen=True)
class Expand:
    """Branching step driven by a callable, e.g. a whole Bell measurement."""
    name: str
    fn: Callable[[StateVector], list[MeasurementBranch]]
    time: int = 0


@dataclass(frozen=True)
class ProtocolSchedule:
    steps: tuple
    reads: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        self.validate()

    def validate(self) -> None:
        seen: set[str] = set()
        last = -np.inf
        for st in self.steps:
            if st.time < last:
                raise ScheduleError(f"step {st!r} at t={st.time} comes after a step at t={last}")
            last = st.time
            if isinstance(st, (Measure, Expand)):
                if st.name in seen:
                    raise ScheduleError(f"outcome {st.name!r} measured twice")
                seen.add(st.name)
        unread = [r for r in self.reads if r not in seen]
        if unread:
            raise ScheduleError(f"correction reads {unread} which are never measured")

    def execute(self, state: StateVector) -> list[tuple[dict, float, StateVector]]:
        """All raw branches as (readings, probability, state)."""
        live = [({}, 1.0, state)]
        for st in self.steps:
            nxt = []
            for readings, p, s in live:
                if isinstance(st, Prepare):
                    nxt.append((readings, p, tensor(s, st.state)))
                elif isinstance(st, Gate):
                    nxt.append((readings, p, apply(st.op, s)))
                elif isinstance(st, Discard):
                    nxt.append((readings, p, remove(s, st.labels, st.vector)))
                else:
                    if isinstance(st, Measure):
                        branches = measure(s, st.target, st.basis, st.outcomes, discard=True)
                    else:
                        branches = st.fn(s)
                    for b in branches:
                        nxt.append(({**readings, st.name: b.outcome}, p * b.probability, b.state))
            live = nxt
        return live


# --- protocols and corrections -----------------------------------------------

@dataclass(frozen=True)
class Protocol:
    name: str
    schedule: ProtocolSchedule
    destinations: dict[str, str]  # payload label -> label that carries it at the end
    outcome: Callable[[dict], Hashable]
    outcome_order: tuple
    finish: tuple[Operator, ...] = ()  # fixed operations done in the correction stage

    @property
    def payloads(self) -> tuple[str, ...]:
        return tuple(self.destinations)

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(self.destinations.values())

    def target(self, state: StateVector) -> StateVector:
        return relabel(state, self.destinations)

    def branches(self, state: StateVector) -> list[MeasurementBranch]:
        """Raw branches grouped by announced outcome, in `outcome_order`.

        Readings that announce the same outcome must leave the same state (up
        to phase); otherwise the announcement would be hiding information.
        """
        for q in self.payloads:
            if state.dim(q) != 2:
                raise ValueError(f"payload {q!r} must be a two-level system")
        groups: dict[Hashable, list] = {}
        for readings, p, s in self.schedule.execute(state):
            groups.setdefault(self.outcome(readings), []).append((p, s))
        out = []
        for key in self.outcome_order:
            if key not in groups:
                continue
            parts = groups.pop(key)
            ref = parts[0][1]
            for _, s in parts[1:]:
                if fidelity(ref, s) < 1 - 1e-10:
                    raise ProtocolInconsistencyError(f"{self.name}: readings for {key!r} disagree")
            out.append(MeasurementBranch(key, sum(p for p, _ in parts), ref))
        if groups:
            raise ProtocolInconsistencyError(f"{self.name}: unexpected outcomes {sorted(map(str, groups))}")
        return out


@dataclass(frozen=True)
class CorrectionRule:
    """Outcome -> one Pauli name per output subsystem."""
    outputs: tuple[str, ...]
    table: dict

    def __post_init__(self):
        for key, rot in self.table.items():
            if len(rot) != len(self.outputs) or any(r not in PAULI for r in rot):
                raise ValueError(f"bad correction {rot!r} for outcome {key!r}")

    def operators(self, outcome) -> list[Operator]:
        try:
            rot = self.table[outcome]
        except KeyError:
            raise KeyError(f"no correction for outcome {outcome!r}") from None
        return [Operator((q,), PAULI[r]) for q, r in zip(self.outputs, rot) if r != "none"]

    def simple(self) -> dict:
        """Same table with a bare name when every output gets the same rotation."""
        return {k: (v[0] if len(set(v)) == 1 else v) for k, v in self.table.items()}


def _correct(protocol: Protocol, rule: CorrectionRule | None, outcome, s: StateVector) -> StateVector:
    s = apply_all(protocol.finish, s)
    if rule is not None:
        s = apply_all(rule.operators(outcome), s)
    return s


def probe_payloads(payloads: Sequence[str]) -> list[StateVector]:
    """Payload states that pin down a channel: each payload maximally entangled
    with its own reference, plus products of |0>, |1>, |+>, |+i>."""
    s = 1 / np.sqrt(2)
    singles = [np.array([1, 0]), np.array([0, 1]), np.array([s, s]), np.array([s, 1j * s])]
    probes = [tensor_all(bell_state(BellOutcome.PHI_PLUS, (q, f"_ref{i}")) for i, q in enumerate(payloads))]
    for v in singles:
        probes.append(tensor_all(StateVector.from_amps(v, (q,)) for q in payloads))
    return probes


def derive_corrections(protocol: Protocol) -> CorrectionRule:
    """Search the pi rotations (and identity) on every output for the one that
    restores each outcome branch on all probe payloads."""
    outputs = protocol.outputs
    runs = [(protocol.target(p), protocol.branches(p)) for p in probe_payloads(protocol.payloads)]
    table = {}
    for key in protocol.outcome_order:
        found = None
        for rot in itertools.product(PAULI_NAMES, repeat=len(outputs)):
            trial = CorrectionRule(outputs, {key: rot})
            ok = True
            for target, branches in runs:
                for b in branches:
                    if b.outcome == key and subsystem_fidelity(_correct(protocol, trial, key, b.state), target) < 1 - CORRECTION_TOL:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                found = rot
                break
        if found is None:
            raise ProtocolInconsistencyError(f"{protocol.name}: no Pauli correction repairs outcome {key!r}")
        table[key] = found
    return CorrectionRule(outputs, table)


# --- reports ---------------------------------------------------------------------

@dataclass(frozen=True)
class BranchRecord:
    outcome: Any
    probability: float
    fidelity_pre: float
    fidelity_post: float
    extra: dict = field(default_factory=dict)


def _jsonable(v):
    if isinstance(v, BellOutcome):
        return v.value
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


@dataclass
class TeleportReport:
    protocol: str
    mode: str
    seed: int | None
    branches: list[BranchRecord]
    mean_fidelity: float
    config: dict = field(default_factory=dict)
    corrections: dict | None = None

    @property
    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    def to_dict(self) -> dict:
        d = {
            "protocol": self.protocol,
            "seed": self.seed,
            "mode": self.mode,
            "branches": [{"outcome": _jsonable(b.outcome), "probability": b.probability,
                          "fidelity_pre": b.fidelity_pre, "fidelity_post": b.fidelity_post,
                          **{k: _jsonable(v) for k, v in b.extra.items()}}
                         for b in self.branches],
            "mean_fidelity": self.mean_fidelity,
            "config": self.config,
        }
        if self.corrections is not None:
            d["corrections"] = [{"outcome": _jsonable(k), "rotation": _jsonable(v)}
                                for k, v in self.corrections.items()]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def run_protocol(protocol: Protocol, state: StateVector, mode: Mode | str = "enumerate",
                 rule: CorrectionRule | None = None, trials: int = 1,
                 config: dict | None = None) -> TeleportReport:
    """Run, correct and score a protocol on `state` (payloads plus any references)."""
    mode = Mode.parse(mode)
    rule = derive_corrections(protocol) if rule is None else rule
    target = protocol.target(state)
    records = []
    for b in protocol.branches(state):
        records.append(BranchRecord(
            b.outcome, b.probability,
            subsystem_fidelity(b.state, target),
            subsystem_fidelity(_correct(protocol, rule, b.outcome, b.state), target)))

    if mode.kind == "enumerate":
        chosen = records
        mean = float(sum(r.probability * r.fidelity_post for r in records))
    elif mode.kind == "branch":
        if mode.k >= len(records):
            raise IndexError(f"branch {mode.k} requested but only {len(records)} exist")
        chosen = [records[mode.k]]
        mean = chosen[0].fidelity_post
    else:
        if trials < 1:
            raise ValueError("trials must be >= 1")
        p = np.array([r.probability for r in records])
        idx = mode.rng().choice(len(records), size=trials, p=p / p.sum())
        chosen = [records[i] for i in idx]
        mean = float(np.mean([r.fidelity_post for r in chosen]))
    return TeleportReport(protocol.name, mode.kind, mode.seed, chosen, mean,
                          dict(config or {}), rule.simple())


# --- BBCJPW one-way teleportation ---------------------------------------------

def bbcjpw_protocol(payload: str = "in", strategy: str = "interaction") -> Protocol:
    near, far = "epr_near", "out"
    steps = [
        Prepare(bell_state(BellOutcome.PSI_MINUS, (near, far))),
        Expand("bell", lambda s: bell_measure(s, payload, near, strategy)),
    ]
    return Protocol("bbcjpw", ProtocolSchedule(steps, ("bell",)), {payload: far},
                    lambda r: r["bell"], BELL_ORDER)


def bbcjpw_teleport(state: StateVector, payload: str = "in", strategy: str = "interaction",
                    mode: Mode | str = "enumerate", trials: int = 1) -> TeleportReport:
    """Teleport `payload` through a singlet; the result arrives on subsystem "out"."""
    if state.dim(payload) != 2:
        raise ValueError("payload must be a two-level system")
    proto = bbcjpw_protocol(payload, strategy)
    return run_protocol(proto, state, mode, trials=trials,
                        config={"strategy": strategy, "payload": payload})


# --- crossed nonlocal measurements: two-way swap ------------------------------

T1, T2 = 1, 2
SWAP_OUTCOMES = ((0, 0), (0, 2), (2, 0), (2, 2))


def crossed_swap_protocol(q1: str = "q1", q2: str = "q2", kickback_fix: bool = True) -> Protocol:
    """Measure Z = (s1z(t1) + s2z(t2)) mod 4 and X = (s1x(t2) + s2x(t1)) mod 4
    through two singlet ancilla pairs. Outcome key is (Z, X)."""
    z1, z2, x1, x2 = "anc_z1", "anc_z2", "anc_x1", "anc_x2"
    couple = [
        (T1, singlet_coupling(q1, z1, "z", kickback_fix=kickback_fix)),
        (T1, singlet_coupling(q2, x2, "x", second_member=True, kickback_fix=kickback_fix)),
        (T2, singlet_coupling(q1, x1, "x", kickback_fix=kickback_fix)),
        (T2, singlet_coupling(q2, z2, "z", second_member=True, kickback_fix=kickback_fix)),
    ]
    steps = [Prepare(bell_state(BellOutcome.PSI_MINUS, (z1, z2))),
             Prepare(bell_state(BellOutcome.PSI_MINUS, (x1, x2)))]
    for t, ops in couple:
        steps += [Gate(op, t) for op in ops]
    steps += [Measure(a, a, time=T2) for a in (z1, z2, x1, x2)]

    def outcome(r):
        return (same_or_different(r[z1], r[z2]), same_or_different(r[x1], r[x2]))

    return Protocol("crossed_swap", ProtocolSchedule(steps, (z1, z2, x1, x2)), {q1: q2, q2: q1},
                    outcome, SWAP_OUTCOMES)


def crossed_swap_qubits(state: StateVector, q1: str = "q1", q2: str = "q2",
                        mode: Mode | str = "enumerate", trials: int = 1,
                        kickback_fix: bool = True) -> TeleportReport:
    proto = crossed_swap_protocol(q1, q2, kickback_fix)
    return run_protocol(proto, state, mode, trials=trials,
                        config={"kickback_fix": kickback_fix, "payloads": [q1, q2]})


# --- atom-cavity gates ------------------------------------------------------------
# Two-level atoms: index 0 = g, 1 = e. Cavities truncated to 0/1 photon.
# Pair ordering (atom, cavity): |g0>, |g1>, |e0>, |e1>.

RI_HALF = np.pi / 4  # "RI-pi/2" pulse: rotation angle pi/4
RI_FULL = np.pi / 2  # "RI-pi" pulse: rotation angle pi/2


def _with_error(angle: float, error: float) -> float:
    # over-rotation: push the angle further in its own direction
    return angle + np.copysign(error, angle) if angle != 0 else angle + error


def ri_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    m = np.eye(4, dtype=complex)
    m[2, 2], m[1, 2] = c, s   # |e0> -> c|e0> + s|g1>
    m[2, 1], m[1, 1] = -s, c  # |g1> -> -s|e0> + c|g1>
    return m


def di_matrix() -> np.ndarray:
    return np.diag([1, 1, 1, -1]).astype(complex)


def r_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class CavityGate:
    kind: str  # "RI", "DI" or "R"
    targets: tuple[str, ...]
    angle: float = 0.0

    def __post_init__(self):
        n = 1 if self.kind == "R" else 2
        if self.kind not in ("RI", "DI", "R"):
            raise ValueError(f"unknown cavity gate {self.kind!r}")
        if len(self.targets) != n:
            raise ValueError(f"{self.kind} acts on {n} subsystem(s), got {self.targets}")

    def matrix(self, gate_error: float = 0.0) -> np.ndarray:
        if self.kind == "RI":
            return ri_matrix(_with_error(self.angle, gate_error))
        if self.kind == "R":
            return r_matrix(_with_error(self.angle, gate_error))
        return di_matrix()

    def operator(self, gate_error: float = 0.0) -> Operator:
        return Operator(self.targets, self.matrix(gate_error))


def RI(atom: str, cavity: str, theta: float) -> CavityGate:
    return CavityGate("RI", (atom, cavity), theta)


def DI(atom: str, cavity: str) -> CavityGate:
    return CavityGate("DI", (atom, cavity))


def R(atom: str, phi: float) -> CavityGate:
    return CavityGate("R", (atom,), phi)


X_TO_Z = np.pi / 4    # R(pi/4) takes (|g>+|e>)/sqrt2 to |e>
READOUT = -np.pi / 4  # R(-pi/4) takes (|g>+|e>)/sqrt2 to |g>, (|g>-|e>)/sqrt2 to -|e>

GROUND = np.array([1, 0], dtype=complex)
EXCITED = np.array([0, 1], dtype=complex)
# cavity basis seen by an auxiliary readout atom: reading g <-> |->, e <-> |+>
DIRECT_READOUT_BASIS = np.array([[1, 1], [-1, 1]], dtype=complex) / np.sqrt(2)


def _atom(label: str, v=GROUND) -> StateVector:
    return StateVector.from_amps(v, (label,))


def _gate_steps(gates: Sequence[CavityGate], gate_error: float, time: int = 0) -> list[Gate]:
    return [Gate(g.operator(gate_error), time) for g in gates]


def _readout_steps(cavity: str, name: str, readout: str, gate_error: float = 0.0,
                   discard_cavity: bool = True, time: int = 0) -> list:
    """Read a cavity in the |+>/|-> basis, either through an auxiliary ground
    atom (RI-pi, R, detection) or by projecting the cavity directly."""
    if readout == "direct":
        return [Measure(name, cavity, DIRECT_READOUT_BASIS, time=time)]
    if readout != "atoms":
        raise ValueError(f"readout must be 'atoms' or 'direct', got {readout!r}")
    aux = f"aux_{cavity}"
    steps = [Prepare(_atom(aux), time)]
    steps += _gate_steps([RI(aux, cavity, RI_FULL), R(aux, READOUT)], gate_error, time)
    steps.append(Measure(name, aux, time=time))
    if discard_cavity:
        steps.append(Discard((cavity,), time=time))
    return steps


def cavity_channel_steps(atom: str, cavity: str, gate_error: float = 0.0) -> list:
    """Excited atom through an empty cavity: (|e0> + |g1>)/sqrt2."""
    return ([Prepare(_atom(atom, EXCITED)), Prepare(_atom(cavity))]
            + _gate_steps([RI(atom, cavity, RI_HALF)], gate_error))


def cavity_pair_steps(c1: str, c2: str, carrier: str) -> list:
    """Excited atom through two empty cavities, RI-pi/2 then RI-pi, leaving the
    cavities in (|01> + |10>)/sqrt2 and the atom in |g>."""
    steps = [Prepare(_atom(carrier, EXCITED)), Prepare(_atom(c1)), Prepare(_atom(c2))]
    steps += _gate_steps([RI(carrier, c1, RI_HALF), RI(carrier, c2, RI_FULL)], 0.0)
    steps.append(Discard((carrier,), GROUND))
    return steps


def cavity_pair_channel(c1: str = "c1", c2: str = "c2") -> StateVector:
    """The prepared cavity pair on its own."""
    ((_, _, s),) = ProtocolSchedule(cavity_pair_steps(c1, c2, "carrier"), ()).execute(StateVector.empty())
    return s


def cavity_teleport_protocol(payload: str = "atom", gate_error: float = 0.0,
                             readout: str = "atoms") -> Protocol:
    """One-way teleportation through a single cavity.

    The channel atom leaves entangled with the cavity; the payload atom passes
    the same cavity (DI), is rotated and detected; an auxiliary atom then reads
    the cavity. The output is the channel atom. With gate errors the cavity is
    not returned exactly to vacuum, so it is kept in the state.

    The channel is correlated in the photon-number basis while the cavity is
    read in the |+>/|-> basis, so the output differs from the payload by a
    fixed basis change besides the outcome-dependent pi rotation. That fixed
    part is one more microwave zone, R(-pi/4), in the correction stage.
    """
    channel, cavity = "channel_atom", "cavity"
    steps = cavity_channel_steps(channel, cavity, gate_error)
    steps += _gate_steps([DI(payload, cavity), R(payload, READOUT)], gate_error)
    steps.append(Measure("payload", payload))
    steps += _readout_steps(cavity, "cavity", readout, gate_error, discard_cavity=False)
    return Protocol("cavity_teleport", ProtocolSchedule(steps, ("payload", "cavity")), {payload: channel},
                    lambda r: (r["payload"], r["cavity"]), ((0, 0), (0, 1), (1, 0), (1, 1)),
                    finish=(R(channel, READOUT).operator(gate_error),))


def cavity_teleport(state: StateVector, payload: str = "atom", gate_error: float = 0.0,
                    mode: Mode | str = "enumerate", trials: int = 1,
                    readout: str = "atoms") -> TeleportReport:
    """Corrections are derived from the ideal pipeline and then applied to the
    (possibly over-rotated) run."""
    rule = derive_corrections(cavity_teleport_protocol(payload, 0.0, readout))
    proto = cavity_teleport_protocol(payload, gate_error, readout)
    return run_protocol(proto, state, mode, rule, trials,
                        config={"gate_error": gate_error, "readout": readout, "payload": payload})


def cavity_swap_protocol(atom1: str = "atom1", atom2: str = "atom2", readout: str = "atoms") -> Protocol:
    """Two-way swap with two cavity pairs (a: z variable, b: x variable).

    Atom 1 meets cavity 1a at t1 and 1b at t2; atom 2 meets 2b at t1 and 2a at
    t2. The x couplings are sandwiched between x->z and z->x rotations, except
    atom 1's final z->x rotation which is left to the correction stage.
    """
    c1a, c2a, c1b, c2b = "cav_1a", "cav_2a", "cav_1b", "cav_2b"
    steps = cavity_pair_steps(c1a, c2a, "carrier_a") + cavity_pair_steps(c1b, c2b, "carrier_b")
    steps += [Gate(g.operator(), T1) for g in (DI(atom1, c1a), R(atom2, X_TO_Z), DI(atom2, c2b), R(atom2, -X_TO_Z))]
    steps += [Gate(g.operator(), T2) for g in (R(atom1, X_TO_Z), DI(atom1, c1b), DI(atom2, c2a))]
    for c in (c1a, c2a, c1b, c2b):
        steps += _readout_steps(c, c, readout, time=T2)

    # the pair starts aligned in the |+>/|-> basis, so equal readings mean
    # an even number of flips: value 2
    def outcome(r):
        return (2 - same_or_different(r[c1a], r[c2a]), 2 - same_or_different(r[c1b], r[c2b]))

    return Protocol("cavity_swap", ProtocolSchedule(steps, (c1a, c2a, c1b, c2b)), {atom1: atom2, atom2: atom1},
                    outcome, SWAP_OUTCOMES, finish=(R(atom1, -X_TO_Z).operator(),))


def cavity_swap(state: StateVector, atom1: str = "atom1", atom2: str = "atom2",
                mode: Mode | str = "enumerate", trials: int = 1, readout: str = "atoms") -> TeleportReport:
    proto = cavity_swap_protocol(atom1, atom2, readout)
    return run_protocol(proto, state, mode, trials=trials,
                        config={"readout": readout, "payloads": [atom1, atom2]})


def random_payloads(labels: Sequence[str], n: int, seed: int, entangled_every: int = 4) -> list[StateVector]:
    """Seeded payload set; every `entangled_every`-th state also involves
    reference qubits ("ref0", "ref1", ...) entangled with the payloads."""
    rng = make_rng(seed)
    out = []
    for i in range(n):
        if entangled_every and i % entangled_every == entangled_every - 1:
            refs = [f"ref{j}" for j in range(len(labels))]
            out.append(random_state(tuple(labels) + tuple(refs), rng))
        else:
            out.append(random_state(tuple(labels), rng))
    return out
