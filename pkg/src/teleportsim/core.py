"""Finite-dimensional state engine.

States are flat complex vectors over an ordered list of labelled subsystems,
leftmost subsystem varying slowest. Everything here is immutable: operations
return new objects and never touch their inputs.

Two-level encoding used throughout the package: index 0 is |up> / |g> /
|0 photons>, index 1 is |down> / |e> / |1 photon>.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
ZERO_BRANCH = 1e-14


class LabelError(ValueError):
    """Unknown or duplicated subsystem label."""


class DimensionError(ValueError):
    """Operator or basis shape does not fit the target subsystems."""


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed directly by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFF_FFFF_FFFF_FFFF))


@dataclass(frozen=True)
class StateVector:
    dims: tuple[int, ...]
    labels: tuple[str, ...]
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(str(x) for x in self.labels)
        if len(dims) != len(labels):
            raise DimensionError("dims and labels differ in length")
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate labels in {labels}")
        if any(d < 2 for d in dims):
            raise DimensionError(f"subsystem dimensions must be >= 2, got {dims}")
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.size != prod(dims):
            raise DimensionError(f"{amps.size} amplitudes for total dimension {prod(dims)}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitude")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_amps(cls, amps, labels: Sequence[str], dims: Sequence[int] | None = None,
                  normalize: bool = False) -> StateVector:
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        if dims is None:
            dims = (2,) * len(labels)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(tuple(dims), tuple(labels), amps)

    @classmethod
    def basis(cls, labels: Sequence[str], indices: Sequence[int],
              dims: Sequence[int] | None = None) -> StateVector:
        dims = tuple(dims) if dims is not None else (2,) * len(labels)
        amps = np.zeros(prod(dims), dtype=complex)
        amps[np.ravel_multi_index(tuple(indices), dims) if dims else 0] = 1.0
        return cls(dims, tuple(labels), amps)

    @classmethod
    def empty(cls) -> StateVector:
        """The trivial state on zero subsystems (a unit scalar)."""
        return cls((), (), np.ones(1, dtype=complex))

    @property
    def tensor(self) -> np.ndarray:
        return self.amps.reshape(self.dims) if self.dims else self.amps.reshape(())

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown subsystem {label!r}; have {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.axis(label)]

    def to_json(self) -> str:
        return json.dumps({
            "dims": list(self.dims),
            "labels": list(self.labels),
            "amps": [[float(a.real), float(a.imag)] for a in self.amps],
        })

    @classmethod
    def from_json(cls, text: str) -> StateVector:
        data = json.loads(text)
        amps = np.array([complex(re, im) for re, im in data["amps"]], dtype=complex)
        return cls(tuple(data["dims"]), tuple(data["labels"]), amps)


@dataclass(frozen=True)
class Operator:
    targets: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)
    unitary: bool = True

    def __post_init__(self):
        targets = tuple(self.targets) if not isinstance(self.targets, str) else (self.targets,)
        if len(set(targets)) != len(targets):
            raise LabelError(f"duplicate operator targets {targets}")
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite operator entry")
        if self.unitary and not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=UNITARY_TOL, rtol=0):
            raise ValueError("operator flagged unitary but U^dag U != I")
        m.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "matrix", m)

    def dagger(self) -> Operator:
        return Operator(self.targets, self.matrix.conj().T, self.unitary)

    def on(self, *targets: str) -> Operator:
        """Same matrix acting on different subsystems."""
        return Operator(tuple(targets), self.matrix, self.unitary)


@dataclass(frozen=True)
class MeasurementBranch:
    outcome: Any
    probability: float
    state: StateVector


@dataclass(frozen=True)
class Mode:
    """How a measurement resolves: all branches, one sampled, or the k-th."""

    kind: str = "enumerate"
    seed: int | None = None
    k: int | None = None

    def __post_init__(self):
        if self.kind not in ("enumerate", "sample", "branch"):
            raise ValueError(f"unknown mode {self.kind!r}")
        if self.kind == "sample" and self.seed is None:
            raise ValueError("sample mode needs a seed")
        if self.kind == "branch" and (self.k is None or self.k < 0):
            raise ValueError("branch mode needs a non-negative index k")

    @classmethod
    def enumerate(cls) -> Mode:
        return cls("enumerate")

    @classmethod
    def sample(cls, seed: int) -> Mode:
        return cls("sample", seed=seed)

    @classmethod
    def branch(cls, k: int) -> Mode:
        return cls("branch", k=k)

    @classmethod
    def parse(cls, spec: Mode | str) -> Mode:
        """Accepts a Mode, or 'enumerate', 'sample:<seed>', 'branch:<k>'."""
        if isinstance(spec, Mode):
            return spec
        kind, _, arg = spec.partition(":")
        if kind == "sample":
            return cls.sample(int(arg))
        if kind == "branch":
            return cls.branch(int(arg))
        return cls(kind)

    def rng(self) -> np.random.Generator | None:
        return make_rng(self.seed) if self.kind == "sample" else None


def select(branches: list, mode: Mode | str = "enumerate", rng: np.random.Generator | None = None,
           weight=lambda b: b.probability) -> list:
    """Resolve a full branch list according to `mode`."""
    mode = Mode.parse(mode)
    if mode.kind == "enumerate":
        return branches
    if mode.kind == "branch":
        if mode.k >= len(branches):
            raise IndexError(f"branch {mode.k} requested but only {len(branches)} exist")
        return [branches[mode.k]]
    rng = rng if rng is not None else mode.rng()
    p = np.array([weight(b) for b in branches], dtype=float)
    return [branches[int(rng.choice(len(branches), p=p / p.sum()))]]


# --- structural operations ---------------------------------------------------

def tensor(s1: StateVector, s2: StateVector) -> StateVector:
    clash = set(s1.labels) & set(s2.labels)
    if clash:
        raise LabelError(f"labels {sorted(clash)} appear in both states")
    amps = np.kron(s1.amps, s2.amps)
    amps /= np.linalg.norm(amps)
    return StateVector(s1.dims + s2.dims, s1.labels + s2.labels, amps)


def tensor_all(states: Iterable[StateVector]) -> StateVector:
    out = StateVector.empty()
    for s in states:
        out = tensor(out, s)
    return out


def reorder(s: StateVector, labels: Sequence[str]) -> StateVector:
    """Permute subsystems into the given label order."""
    labels = tuple(labels)
    if sorted(labels) != sorted(s.labels):
        raise LabelError(f"{labels} is not a permutation of {s.labels}")
    perm = [s.axis(x) for x in labels]
    t = np.transpose(s.tensor, perm) if perm else s.tensor
    return StateVector(tuple(s.dims[i] for i in perm), labels, t.reshape(-1))


def relabel(s: StateVector, mapping: dict[str, str]) -> StateVector:
    return StateVector(s.dims, tuple(mapping.get(x, x) for x in s.labels), s.amps)


def remove(s: StateVector, labels: str | Sequence[str], vector=None) -> StateVector:
    """Drop subsystems known to be jointly in the pure state `vector` (default:
    the basis state carrying all the weight). Fails if they are entangled with
    the rest."""
    labels = (labels,) if isinstance(labels, str) else tuple(labels)
    axes = _target_axes(s, labels)
    d = prod(s.dims[a] for a in axes)
    t = np.moveaxis(s.tensor, axes, list(range(len(axes)))).reshape(d, -1)
    if vector is None:
        vector = np.zeros(d, dtype=complex)
        vector[int(np.argmax(np.sum(np.abs(t) ** 2, axis=1)))] = 1.0
    rest = np.asarray(vector, dtype=complex).reshape(d).conj() @ t
    norm = np.linalg.norm(rest)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"subsystems {labels} are not in the given pure state (overlap {norm:.3g})")
    keep = [i for i in range(len(s.dims)) if i not in axes]
    return StateVector(tuple(s.dims[i] for i in keep), tuple(s.labels[i] for i in keep), rest / norm)


# --- dynamics ------------------------------------------------------------------

def _target_axes(s: StateVector, targets: Sequence[str]) -> list[int]:
    if not targets:
        raise LabelError("empty target list")
    axes = [s.axis(t) for t in targets]
    if len(set(axes)) != len(axes):
        raise LabelError(f"repeated targets {targets}")
    return axes


def _apply_matrix(s: StateVector, targets: Sequence[str], m: np.ndarray) -> np.ndarray:
    axes = _target_axes(s, targets)
    sub = [s.dims[a] for a in axes]
    if m.shape != (prod(sub), prod(sub)):
        raise DimensionError(f"matrix {m.shape} does not fit targets {tuple(targets)} with dims {sub}")
    t = np.moveaxis(s.tensor, axes, list(range(len(axes))))
    t = (m @ t.reshape(prod(sub), -1)).reshape(t.shape)
    return np.moveaxis(t, list(range(len(axes))), axes).reshape(-1)


def apply(op: Operator, s: StateVector) -> StateVector:
    amps = _apply_matrix(s, op.targets, op.matrix)
    return StateVector(s.dims, s.labels, amps / np.linalg.norm(amps))


def apply_all(ops: Iterable[Operator], s: StateVector) -> StateVector:
    for op in ops:
        s = apply(op, s)
    return s


def measure(s: StateVector, targets: Sequence[str] | str, basis=None,
            outcomes: Sequence[Hashable] | None = None,
            mode: Mode | str = "enumerate", rng: np.random.Generator | None = None,
            discard: bool = False) -> list[MeasurementBranch]:
    """Projective measurement of `targets`.

    `basis` holds orthonormal basis vectors as columns over the product of the
    target dimensions (computational basis when omitted). `outcomes` assigns a
    label to each column; columns sharing a label form one degenerate
    eigenspace. Without labels the outcome is the column index. Post-states keep every
    subsystem unless `discard` is set, which drops the measured subsystems
    (nondegenerate outcomes only).
    """
    if isinstance(targets, str):
        targets = (targets,)
    axes = _target_axes(s, targets)
    d = prod(s.dims[a] for a in axes)
    basis = np.eye(d, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    if basis.shape != (d, d):
        raise DimensionError(f"basis shape {basis.shape} for target dimension {d}")
    if not np.allclose(basis.conj().T @ basis, np.eye(d), atol=UNITARY_TOL, rtol=0):
        raise ValueError("measurement basis is not orthonormal")
    labels = list(range(d)) if outcomes is None else list(outcomes)
    if len(labels) != d:
        raise DimensionError("one outcome label per basis vector required")

    coeffs = _apply_matrix(s, targets, basis.conj().T)  # amplitudes in the measurement basis
    ct = np.moveaxis(coeffs.reshape(s.dims), axes, list(range(len(axes)))).reshape(d, -1)
    groups: dict[Hashable, list[int]] = {}
    for col, lab in enumerate(labels):
        groups.setdefault(lab, []).append(col)

    branches = []
    for lab, cols in groups.items():
        p = float(np.sum(np.abs(ct[cols]) ** 2))
        if p < ZERO_BRANCH:
            continue
        if discard:
            if len(cols) != 1:
                raise ValueError("cannot discard subsystems after a degenerate outcome")
            keep = [i for i in range(len(s.dims)) if i not in axes]
            rest = StateVector(tuple(s.dims[i] for i in keep), tuple(s.labels[i] for i in keep),
                               ct[cols[0]] / np.sqrt(p))
            branches.append(MeasurementBranch(lab, p, rest))
            continue
        proj = np.zeros_like(ct)
        proj[cols] = ct[cols]
        proj = (basis @ proj).reshape([s.dims[a] for a in axes] + [s.dims[i] for i in range(len(s.dims)) if i not in axes])
        post = np.moveaxis(proj, list(range(len(axes))), axes).reshape(-1)
        branches.append(MeasurementBranch(lab, p, StateVector(s.dims, s.labels, post / np.sqrt(p))))
    return select(branches, mode, rng)


def fidelity(s1: StateVector, s2: StateVector) -> float:
    """|<s1|s2>|^2; blind to global phase."""
    if s1.dims != s2.dims or s1.labels != s2.labels:
        if sorted(s1.labels) == sorted(s2.labels):
            s2 = reorder(s2, s1.labels)
        if s1.dims != s2.dims or s1.labels != s2.labels:
            raise DimensionError(f"space mismatch: {s1.labels}{s1.dims} vs {s2.labels}{s2.dims}")
    return float(min(1.0, abs(np.vdot(s1.amps, s2.amps)) ** 2))


def subsystem_fidelity(s: StateVector, target: StateVector) -> float:
    """Weight of `s` on `target` over target's subsystems, the rest left open:
    || (<target| x 1) |s> ||^2. Equals `fidelity` when nothing else is left
    entangled with the target subsystems."""
    missing = set(target.labels) - set(s.labels)
    if missing:
        raise LabelError(f"target subsystems {sorted(missing)} not in state")
    for lab in target.labels:
        if s.dim(lab) != target.dim(lab):
            raise DimensionError(f"subsystem {lab!r} has dimension {s.dim(lab)} vs {target.dim(lab)}")
    rest = [x for x in s.labels if x not in target.labels]
    t = reorder(s, target.labels + tuple(rest)).amps.reshape(target.amps.size, -1)
    v = target.amps.conj() @ t
    return float(min(1.0, np.vdot(v, v).real))


def random_state(labels: Sequence[str], rng: np.random.Generator,
                 dims: Sequence[int] | None = None) -> StateVector:
    """Haar-random pure state."""
    dims = tuple(dims) if dims is not None else (2,) * len(labels)
    v = rng.normal(size=prod(dims)) + 1j * rng.normal(size=prod(dims))
    return StateVector.from_amps(v, labels, dims, normalize=True)


# single-qubit matrices shared by the protocol modules
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
# z <-> x basis change with real coefficients: |up>,|down> <-> (|up> +- |down>)/sqrt2
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {"none": I2, "x": X, "y": Y, "z": Z}
