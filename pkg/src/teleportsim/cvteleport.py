"""Continuous-variable teleportation on a uniform grid.

Wavefunctions live on a periodic box of n points (a discrete torus) with
hbar = 1. Momentum eigenfunctions are e^{ipx}, so the transform to momentum
space uses the kernel e^{-ipx}; momenta form the lattice 2*pi*k/L with
L = n*dx. Position readings are binned at width dx, which puts every outcome
on the translation lattice and makes the shift corrections exact index rolls.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Mode
from .teleport import BranchRecord, TeleportReport

ZERO_BRANCH = 1e-14
DEFAULT_MEMORY_BUDGET = 1 << 30  # bytes
FWHM_PER_SIGMA = 2 * np.sqrt(2 * np.log(2))


class ResolutionError(ValueError):
    """The grid is too coarse (or too small) for the requested states."""


class MemoryBudgetError(MemoryError):
    """A run would exceed the configured memory budget."""


@dataclass(frozen=True)
class Grid1D:
    n_points: int
    dx: float

    def __post_init__(self):
        if self.n_points < 32 or self.n_points % 2:
            raise ValueError(f"n_points must be even and >= 32, got {self.n_points}")
        if not self.dx > 0:
            raise ValueError("dx must be positive")

    @classmethod
    def symmetric(cls, n_points: int, half_range: float) -> Grid1D:
        """n points covering [-half_range, half_range)."""
        return cls(int(n_points), 2.0 * half_range / n_points)

    @property
    def x_min(self) -> float:
        return -(self.n_points // 2) * self.dx

    @property
    def length(self) -> float:
        return self.n_points * self.dx

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.dx

    @property
    def p(self) -> np.ndarray:
        """Momentum lattice in the same centred order as x."""
        return 2 * np.pi * (np.arange(self.n_points) - self.n_points // 2) / self.length

    @property
    def dp(self) -> float:
        return 2 * np.pi / self.length

    def fourier(self) -> np.ndarray:
        """Unitary F[k, i] = exp(-i p_k x_i) / sqrt(n)."""
        return np.exp(-1j * np.outer(self.p, self.x)) / np.sqrt(self.n_points)

    def index(self, value: float, tol: float = 1e-9) -> int:
        """Signed lattice offset of `value` (value = offset * dx)."""
        m = value / self.dx
        k = int(np.rint(m))
        if abs(m - k) > tol:
            raise ValueError(f"{value!r} is not on the dx = {self.dx!r} lattice")
        return k


@dataclass(frozen=True)
class WaveFunction:
    """Amplitudes with sum |amps|^2 dx^rank = 1, one axis per mode."""

    modes: tuple[str, ...]
    grid: Grid1D
    amps: np.ndarray

    def __post_init__(self):
        modes = (self.modes,) if isinstance(self.modes, str) else tuple(self.modes)
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.grid.n_points,) * len(modes):
            raise ValueError(f"amps shape {amps.shape} does not match {len(modes)} modes on {self.grid}")
        norm = np.sum(np.abs(amps) ** 2) * self.grid.dx ** len(modes)
        if abs(norm - 1) > 1e-8:
            raise ValueError(f"wavefunction not normalized (norm={norm!r})")
        if len(set(modes)) != len(modes):
            raise ValueError(f"duplicate modes {modes}")
        amps.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_unit(cls, modes, grid: Grid1D, vec: np.ndarray, normalize: bool = False) -> WaveFunction:
        """Build from lattice amplitudes with sum |vec|^2 = 1."""
        modes = (modes,) if isinstance(modes, str) else tuple(modes)
        vec = np.asarray(vec, dtype=complex)
        if normalize:
            vec = vec / np.linalg.norm(vec)
        return cls(modes, grid, vec / grid.dx ** (len(modes) / 2))

    @classmethod
    def from_function(cls, mode: str, grid: Grid1D, fn) -> WaveFunction:
        return cls.from_unit(mode, grid, fn(grid.x), normalize=True)

    @property
    def unit(self) -> np.ndarray:
        """Lattice amplitudes with unit Euclidean norm."""
        return self.amps * self.grid.dx ** (len(self.modes) / 2)

    def axis(self, mode: str) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise KeyError(f"unknown mode {mode!r}; have {self.modes}") from None

    def to_momentum(self, mode: str) -> np.ndarray:
        """Unit lattice amplitudes with `mode`'s axis in momentum space."""
        return _along(self.grid.fourier(), self.unit, self.axis(mode))

    def mean(self, mode: str, variable: str = "q") -> float:
        ax = self.axis(mode)
        t = self.unit if variable == "q" else self.to_momentum(mode)
        vals = self.grid.x if variable == "q" else self.grid.p
        dens = np.abs(np.moveaxis(t, ax, 0)) ** 2
        return float(vals @ dens.reshape(dens.shape[0], -1).sum(axis=1))

    def to_json(self) -> str:
        return json.dumps({"modes": list(self.modes), "n_points": self.grid.n_points, "dx": self.grid.dx,
                           "amps": [[float(z.real), float(z.imag)] for z in self.amps.reshape(-1)]})

    @classmethod
    def from_json(cls, text: str) -> WaveFunction:
        d = json.loads(text)
        grid = Grid1D(d["n_points"], d["dx"])
        amps = np.array([complex(a, b) for a, b in d["amps"]]).reshape((grid.n_points,) * len(d["modes"]))
        return cls(tuple(d["modes"]), grid, amps)

    def to_csv(self) -> str:
        if len(self.modes) != 1:
            raise ValueError("CSV export covers single-mode wavefunctions; use JSON for more modes")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "re", "im"])
        for x, z in zip(self.grid.x, self.amps):
            w.writerow([repr(float(x)), repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()


def _along(m: np.ndarray, t: np.ndarray, axis: int) -> np.ndarray:
    """Apply matrix m along one axis of t."""
    return np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)


def _roll_to_index(value_index: np.ndarray, n: int) -> np.ndarray:
    """Wrap signed lattice offsets into centred grid indices."""
    return (value_index + n // 2) % n



def gaussian(grid: Grid1D, mode: str = "in", center: float = 0.0, width: float = 1.0,
             momentum: float = 0.0) -> WaveFunction:
    """exp(-(x-center)^2 / (2 width^2) + i momentum x); width 1 is the vacuum."""
    return WaveFunction.from_function(
        mode, grid, lambda x: np.exp(-(x - center) ** 2 / (2 * width ** 2) + 1j * momentum * x))


def check_resolution(grid: Grid1D, r: float) -> None:
    """The squeezed quadrature of make_epr has probability-density width
    e^{-r}; sampling it at more than two such widths per step is refused."""
    if grid.dx > 2 * np.exp(-r):
        raise ResolutionError(f"dx = {grid.dx:.4g} cannot resolve squeezing r = {r} "
                              f"(needs dx <= 2 e^-r = {2 * np.exp(-r):.4g})")


def check_contained(psi: WaveFunction, tol: float = 1e-6) -> None:
    """Input must be band-limited and away from the box edges."""
    n = psi.grid.n_points
    edge = max(1, n // 16)
    for ax in range(len(psi.modes)):
        dens_x = np.sum(np.abs(np.moveaxis(psi.unit, ax, 0)) ** 2, axis=tuple(range(1, len(psi.modes))))
        dens_p = np.sum(np.abs(np.moveaxis(psi.to_momentum(psi.modes[ax]), ax, 0)) ** 2,
                        axis=tuple(range(1, len(psi.modes))))
        if dens_x[:edge].sum() + dens_x[-edge:].sum() > tol:
            raise ResolutionError(f"mode {psi.modes[ax]!r} has weight at the box edge")
        if dens_p[:edge].sum() + dens_p[-edge:].sum() > tol:
            raise ResolutionError(f"mode {psi.modes[ax]!r} is not resolved by dx = {psi.grid.dx:.4g}")


def make_epr(grid: Grid1D, r: float, modes: Sequence[str] = ("Q1", "Q2")) -> WaveFunction:
    """Two-mode squeezed state exp(-e^{2r}(Q1+Q2)^2/4 - e^{-2r}(Q1-Q2)^2/4),
    periodized over the box so it is translation covariant on the torus."""
    if not (np.isfinite(r) and r >= 0):
        raise ValueError("squeezing r must be finite and >= 0")
    check_resolution(grid, r)
    length = grid.length
    q1, q2 = np.meshgrid(grid.x, grid.x, indexing="ij")
    total, diff = q1 + q2, q1 - q2
    # images (q1 + m L, q2 + n L) shift the sum by k L and the difference by
    # j L with k = m + n, j = m - n of equal parity; reach ~7 widths each way
    kmax = int(np.ceil(14 * np.exp(-r) / length)) + 2
    jmax = int(np.ceil(14 * np.exp(r) / length)) + 2
    amp = np.zeros_like(total)
    for k in range(-kmax, kmax + 1):
        for j in range(-jmax, jmax + 1):
            if (k - j) % 2 == 0:
                amp += np.exp(-np.exp(2 * r) * (total + k * length) ** 2 / 4
                              - np.exp(-2 * r) * (diff + j * length) ** 2 / 4)
    return WaveFunction.from_unit(tuple(modes), grid, amp, normalize=True)


# --- couplings and measurements -------------------------------------------------

def probe_couple(s: WaveFunction, system: str, probe: str, variable: str = "q", sign: int = 1) -> WaveFunction:
    """Impulsive von Neumann coupling exp(-i sign * v_system * P_probe).

    The probe position moves by sign * v. For v = q the shift is an exact roll
    of the probe axis per system grid point; for v = p both axes are taken to
    momentum space, where the coupling is a pure phase.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if system == probe:
        raise ValueError("system and probe must be different modes")
    ax_s, ax_p = s.axis(system), s.axis(probe)
    n = s.grid.n_points
    t = s.unit
    if variable == "q":
        t = np.moveaxis(t, (ax_s, ax_p), (0, 1))
        out = np.empty_like(t)
        for i in range(n):
            out[i] = np.roll(t[i], sign * (i - n // 2), axis=0)
        t = np.moveaxis(out, (0, 1), (ax_s, ax_p))
    elif variable == "p":
        f = s.grid.fourier()
        t = _along(f, _along(f, t, ax_s), ax_p)
        shape = [1] * t.ndim
        shape[ax_s] = shape[ax_p] = n
        phase = np.exp(-1j * sign * np.multiply.outer(s.grid.p, s.grid.p))
        if ax_s > ax_p:
            phase = phase.T
        t = t * phase.reshape(shape)
        fh = f.conj().T
        t = _along(fh, _along(fh, t, ax_p), ax_s)
    else:
        raise ValueError(f"variable must be 'q' or 'p', got {variable!r}")
    return WaveFunction.from_unit(s.modes, s.grid, t)


@dataclass(frozen=True)
class Quadrature:
    """q or p of one mode, or a signed sum of two like quadratures."""
    kind: str
    modes: tuple[str, ...]
    signs: tuple[int, ...] = (1,)

    def __post_init__(self):
        modes = (self.modes,) if isinstance(self.modes, str) else tuple(self.modes)
        signs = tuple(self.signs) if len(self.signs) == len(modes) else (1,) * len(modes)
        if self.kind not in ("q", "p") or len(modes) not in (1, 2) or signs[0] != 1 or any(x not in (1, -1) for x in signs):
            raise ValueError(f"unsupported observable {self.kind}{modes}{signs}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "signs", signs)

    def __str__(self):
        if len(self.modes) == 1:
            return f"{self.kind}[{self.modes[0]}]"
        op = "+" if self.signs[1] > 0 else "-"
        return f"{self.kind}[{self.modes[0]}]{op}{self.kind}[{self.modes[1]}]"


@dataclass(frozen=True)
class CVOutcome:
    observable: str
    value: float
    probability: float


def _sectors(s: WaveFunction, obs: Quadrature):
    """(tensor in the observable's representation, bin index per lattice point
    of the observable's axes, bin values)."""
    g = s.grid
    n = g.n_points
    t = s.unit if obs.kind == "q" else _along_many(g.fourier(), s.unit, [s.axis(m) for m in obs.modes])
    values = g.x if obs.kind == "q" else g.p
    if len(obs.modes) == 1:
        return t, np.arange(n), values
    idx = np.arange(n) - n // 2
    combo = np.add.outer(idx, obs.signs[1] * idx)
    # sums are read modulo the lattice period
    return t, _roll_to_index(combo, n), values


def _along_many(m, t, axes):
    for ax in axes:
        t = _along(m, t, ax)
    return t


def quadrature_distribution(s: WaveFunction, obs: Quadrature) -> tuple[np.ndarray, np.ndarray]:
    """(bin values, probabilities) for every outcome on the lattice."""
    t, bins, values = _sectors(s, obs)
    axes = [s.axis(m) for m in obs.modes]
    dens = np.abs(np.moveaxis(t, axes, list(range(len(axes))))) ** 2
    dens = dens.reshape(dens.shape[:len(axes)] + (-1,)).sum(axis=-1)
    probs = np.bincount(bins.reshape(-1), weights=dens.reshape(-1), minlength=len(values))
    return values, probs


def measure_quadrature(s: WaveFunction, obs: Quadrature, mode: Mode | str) -> tuple[CVOutcome, WaveFunction]:
    """Projective reading of `obs` binned at the lattice spacing. Sampling
    draws from the seeded generator; branch(k) takes outcome bin k (counted
    over nonzero bins in increasing value)."""
    mode = Mode.parse(mode)
    values, probs = quadrature_distribution(s, obs)
    live = np.flatnonzero(probs >= ZERO_BRANCH)
    if mode.kind == "sample":
        k = int(mode.rng().choice(live, p=probs[live] / probs[live].sum()))
    elif mode.kind == "branch":
        if mode.k >= len(live):
            raise IndexError(f"branch {mode.k} requested but only {len(live)} exist")
        k = int(live[mode.k])
    else:
        raise ValueError("measure_quadrature resolves one outcome; use quadrature_distribution to enumerate")
    return _outcome(s, obs, k, probs[k]), _project_state(s, obs, k, probs[k])


def _outcome(s, obs, k, p):
    values = s.grid.x if obs.kind == "q" else s.grid.p
    return CVOutcome(str(obs), float(values[k]), float(p))


def _project_state(s: WaveFunction, obs: Quadrature, k: int, p: float) -> WaveFunction:
    if p < ZERO_BRANCH:
        raise ValueError("empty measurement branch")
    t, bins, _ = _sectors(s, obs)
    axes = [s.axis(m) for m in obs.modes]
    shape = [1] * t.ndim
    for ax in axes:
        shape[ax] = s.grid.n_points
    t = t * (bins == k).reshape(shape)
    if obs.kind == "p":
        t = _along_many(s.grid.fourier().conj().T, t, axes)
    return WaveFunction.from_unit(s.modes, s.grid, t / np.sqrt(p))


# --- corrections and oracles -------------------------------------------------------

# output laws, each relating a protocol output to an input psi:
#   oneway:    out(x) = exp(-i b x) psi(x + a)
#   crossed_1: out(x) = exp(+i b x) psi(x - a)   (mode 1 carries input 2)
#   crossed_2: out(x) = exp(-i b x) psi(x + a)   (mode 2 carries input 1)
_LAW = {"oneway": (-1, 1), "crossed_1": (1, -1), "crossed_2": (-1, 1)}


def _law(direction: str):
    try:
        return _LAW[direction]
    except KeyError:
        raise ValueError(f"direction must be one of {sorted(_LAW)}") from None


def analytic_oracle_output(psi: WaveFunction, a: float, b: float, direction: str = "oneway") -> WaveFunction:
    """Evaluate the ideal output law on the grid. Translations wrap around
    the periodic box, matching the torus the protocols run on."""
    if len(psi.modes) != 1:
        raise ValueError("oracle takes a single-mode wavefunction")
    phase_sign, shift_sign = _law(direction)
    g = psi.grid
    vals = np.roll(psi.unit, -shift_sign * g.index(a))
    return WaveFunction.from_unit(psi.modes, g, np.exp(1j * phase_sign * b * g.x) * vals, normalize=True)


def _correct_unit(vec: np.ndarray, axis: int, grid: Grid1D, a: float, b: float, direction: str) -> np.ndarray:
    phase_sign, shift_sign = _law(direction)
    out = np.roll(vec, shift_sign * grid.index(a), axis=axis)
    shape = [1] * vec.ndim
    shape[axis] = grid.n_points
    return out * np.exp(-1j * phase_sign * b * grid.x).reshape(shape)


def shift_correct(s: WaveFunction, mode: str, a: float, b: float, direction: str = "oneway") -> WaveFunction:
    """Undo the known translation by a and kick by b of the given output law:
    an exact roll of the mode's axis followed by a phase multiply."""
    ax = s.axis(mode)
    return WaveFunction.from_unit(s.modes, s.grid, _correct_unit(s.unit, ax, s.grid, a, b, direction))


def overlap(s1: WaveFunction, s2: WaveFunction) -> float:
    """|<s1|s2>|^2 for states on the same modes."""
    if s1.modes != s2.modes or s1.grid != s2.grid:
        raise ValueError("overlap needs identical modes and grids")
    return float(abs(np.vdot(s1.unit, s2.unit)) ** 2)


def _mode_fidelity(t: np.ndarray, axis: int, target: np.ndarray) -> float:
    """Weight of the 2-mode lattice state t on target in one mode, other mode left open."""
    v = np.tensordot(target.conj(), t, axes=([0], [axis]))
    return float(min(1.0, np.vdot(v, v).real))


# --- one-way teleportation -----------------------------------------------------------

def _oneway_sector(c: np.ndarray, epr: np.ndarray, grid: Grid1D, m: int) -> np.ndarray:
    """Output amplitudes G[b, Q2] (unnormalized) for reading q + Q1 = m*dx.

    In the sector q + Q1 = a the input index is fixed by the Q1 index, and
    p - P1 acts as minus the momentum conjugate to Q1, so the second reading
    is a discrete Fourier transform over Q1.
    """
    n = grid.n_points
    j = np.arange(n)
    i_in = (m + n // 2 - j + n // 2) % n  # x_i + x_j = a on the torus
    h = c[i_in][:, None] * epr
    return grid.fourier().conj() @ h


def _oneway_inputs(psi_in: WaveFunction, r: float, check_input: bool):
    if len(psi_in.modes) != 1:
        raise ValueError("input must be a single mode")
    if check_input:
        check_contained(psi_in)
    return psi_in.unit, make_epr(psi_in.grid, r).unit


def _oneway_weights(c: np.ndarray, epr: np.ndarray, g: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """(P(a, b), P(a, b) * F(a, b)) over all n^2 readings, rows indexed by a."""
    n = g.n_points
    probs = np.empty((n, n))
    post_weight = np.empty((n, n))
    kick = np.exp(1j * np.outer(g.p, g.x))
    for m in range(-n // 2, n // 2):
        gmat = _oneway_sector(c, epr, g, m)
        probs[m + n // 2] = np.sum(np.abs(gmat) ** 2, axis=1)
        post_weight[m + n // 2] = np.abs((np.roll(gmat, m, axis=1) * kick) @ c.conj()) ** 2
    return probs, post_weight


def oneway_branch_table(psi_in: WaveFunction, r: float, check_input: bool = True) -> dict[str, np.ndarray]:
    """Exact per-branch data of cv_teleport_oneway: readings a, b, their
    probability and the corrected fidelity. The correction is the exact
    inverse of the oracle map, so the fidelity equals the overlap of the
    uncorrected output with analytic_oracle_output."""
    c, epr = _oneway_inputs(psi_in, r, check_input)
    g = psi_in.grid
    probs, post_weight = _oneway_weights(c, epr, g)
    a, b = np.meshgrid(g.x, g.p, indexing="ij")
    fid = np.divide(post_weight, probs, out=np.zeros_like(probs), where=probs >= ZERO_BRANCH)
    return {"a": a, "b": b, "probability": probs, "fidelity": fid}


def cv_teleport_oneway(psi_in: WaveFunction, r: float, mode: Mode | str = "sample:0", trials: int = 200,
                       check_input: bool = True) -> TeleportReport:
    """Teleport a single-mode state through make_epr(r).

    Measures q + Q1 then p - P1 on the sender side; Q2 carries the output.
    In sample mode `trials` branches are drawn; enumerate mode weights all
    n^2 branches exactly (records are not listed, only the mean; see
    oneway_branch_table)."""
    mode = Mode.parse(mode)
    g = psi_in.grid
    n = g.n_points
    c, epr = _oneway_inputs(psi_in, r, check_input)
    probs, post_weight = _oneway_weights(c, epr, g)
    config = {"r": r, "n_points": n, "dx": g.dx}
    if mode.kind == "enumerate":
        return TeleportReport("cv_oneway", "enumerate", None, [], float(post_weight.sum()), config)

    flat = probs.reshape(-1)
    if mode.kind == "sample":
        if trials < 1:
            raise ValueError("trials must be >= 1")
        picks = mode.rng().choice(flat.size, size=trials, p=flat / flat.sum())
    else:
        live = np.flatnonzero(flat >= ZERO_BRANCH)
        if mode.k >= len(live):
            raise IndexError(f"branch {mode.k} requested but only {len(live)} exist")
        picks = [live[mode.k]]
    sectors: dict[int, np.ndarray] = {}
    records = []
    for idx in picks:
        ia, ib = divmod(int(idx), n)
        if ia not in sectors:
            sectors[ia] = _oneway_sector(c, epr, g, ia - n // 2)
        a, b = float(g.x[ia]), float(g.p[ib])
        p = float(flat[idx])
        out = WaveFunction.from_unit(("Q2",), g, sectors[ia][ib], normalize=True)
        oracle = analytic_oracle_output(WaveFunction(("Q2",), g, psi_in.amps), a, b, "oneway")
        pre = abs(np.vdot(c, out.unit)) ** 2
        records.append(BranchRecord((a, b), p, float(pre), float(post_weight[ia, ib] / p),
                                    {"oracle_overlap": overlap(out, oracle)}))
    mean = float(np.mean([rec.fidelity_post for rec in records]))
    return TeleportReport("cv_oneway", mode.kind, mode.seed, records, mean, config)


# --- crossed two-way swap --------------------------------------------------------------

def estimate_swap_bytes(n_points: int) -> int:
    """Peak memory of cv_crossed_swap: about five live copies of the 4-mode tensor."""
    return 5 * 16 * n_points ** 4


def probe_state(grid: Grid1D, mode: str, width: float) -> WaveFunction:
    """Near-delta pointer at 0; `width` is the FWHM of the amplitude profile."""
    return gaussian(grid, mode, 0.0, width / FWHM_PER_SIGMA)


def cv_crossed_swap(psi1: WaveFunction, psi2: WaveFunction, mode: Mode | str = "sample:0", trials: int = 1,
                    probe_width: float | None = None, memory_budget: int = DEFAULT_MEMORY_BUDGET,
                    check_input: bool = True) -> TeleportReport:
    """Swap two single-mode states by the crossed measurement of
    a = q1(t1) - q2(t2) and b = p1(t2) - p2(t1).

    Each nonlocal variable is accumulated on one pointer mode (A for a, B for
    b). Couplings: t1: q1 -> A (+), p2 -> B (-); t2: q2 -> A (-), p1 -> B (+).
    Both pointers are then read in position. Fidelities are per direction:
    mode 1 against input 2 and mode 2 against input 1, each after its shift
    correction.
    """
    mode = Mode.parse(mode)
    g = psi1.grid
    if psi2.grid != g or len(psi1.modes) != 1 or len(psi2.modes) != 1:
        raise ValueError("inputs must be single-mode states on one grid")
    need = estimate_swap_bytes(g.n_points)
    if need > memory_budget:
        raise MemoryBudgetError(f"crossed swap on {g.n_points} points needs ~{need / 2**20:.0f} MiB, "
                                f"budget is {memory_budget / 2**20:.0f} MiB")
    if check_input:
        check_contained(psi1)
        check_contained(psi2)
    width = 2 * g.dx if probe_width is None else probe_width
    c1, c2 = psi1.unit, psi2.unit
    pa, pb = probe_state(g, "A", width).unit, probe_state(g, "B", width).unit
    t = np.einsum("i,j,k,l->ijkl", c1, c2, pa, pb)
    s = WaveFunction.from_unit(("q1", "q2", "A", "B"), g, t)
    del t
    s = probe_couple(s, "q1", "A", "q", +1)   # t1
    s = probe_couple(s, "q2", "B", "p", -1)   # t1
    s = probe_couple(s, "q2", "A", "q", -1)   # t2
    s = probe_couple(s, "q1", "B", "p", +1)   # t2
    t = s.unit
    del s
    n = g.n_points
    probs = np.sum(np.abs(t) ** 2, axis=(0, 1))  # over (A, B)

    flat = probs.reshape(-1)
    live = np.flatnonzero(flat >= ZERO_BRANCH)
    if mode.kind == "sample":
        if trials < 1:
            raise ValueError("trials must be >= 1")
        picks = mode.rng().choice(flat.size, size=trials, p=flat / flat.sum())
    elif mode.kind == "branch":
        if mode.k >= len(live):
            raise IndexError(f"branch {mode.k} requested but only {len(live)} exist")
        picks = [live[mode.k]]
    else:
        picks = live
    records = []
    for idx in picks:
        ia, ib = divmod(int(idx), n)
        a, b = float(g.x[ia]), float(g.x[ib])
        p = float(flat[idx])
        post = t[:, :, ia, ib] / np.sqrt(p)
        pre1, pre2 = _mode_fidelity(post, 0, c2), _mode_fidelity(post, 1, c1)
        fixed = _correct_unit(_correct_unit(post, 0, g, a, b, "crossed_1"), 1, g, a, b, "crossed_2")
        f1, f2 = _mode_fidelity(fixed, 0, c2), _mode_fidelity(fixed, 1, c1)
        extra = {"fidelity_1": f1, "fidelity_2": f2}
        o1 = analytic_oracle_output(WaveFunction(("q1",), g, psi2.amps), a, b, "crossed_1").unit
        o2 = analytic_oracle_output(WaveFunction(("q2",), g, psi1.amps), a, b, "crossed_2").unit
        extra["oracle_overlap_1"] = _mode_fidelity(post, 0, o1)
        extra["oracle_overlap_2"] = _mode_fidelity(post, 1, o2)
        records.append(BranchRecord((a, b), p, min(pre1, pre2), min(f1, f2), extra))
    weights = np.array([r.probability for r in records]) if mode.kind == "enumerate" else np.ones(len(records))
    mean = float(weights @ np.array([r.fidelity_post for r in records]) / weights.sum())
    config = {"n_points": n, "dx": g.dx, "probe_width": width}
    return TeleportReport("cv_crossed_swap", mode.kind, mode.seed, records, mean, config)


def sweep_oneway(psi_in_fn, rs: Sequence[float], n_points: Sequence[int], half_range: float = 12.0) -> list[dict]:
    """Exact mean fidelity over a grid of (r, n_points); psi_in_fn(grid) builds the input."""
    rows = []
    for n in n_points:
        grid = Grid1D.symmetric(n, half_range)
        psi = psi_in_fn(grid)
        for r in rs:
            rep = cv_teleport_oneway(psi, r, "enumerate")
            rows.append({"r": r, "n_points": n, "mean_fidelity": rep.mean_fidelity})
    return rows


def sweep_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["r", "n_points", "mean_fidelity"], lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()
