"""Bell-state discrimination with linear single-particle evolutions.

Each of the two particles evolves on its own: a particle entering as
|up>_1, |down>_1, |up>_2, |down>_2 leaves in the mode superposition given by
the rows a, b, c, d of a `LinearEvolution`. Detectors only report which output
modes fired. Detection patterns use 1-based mode numbers.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .bellkit import BELL_ORDER, BellOutcome
from .core import make_rng

ISOMETRY_TOL = 1e-10
DEFAULT_TOL = 1e-9
S2 = np.sqrt(2)


class Statistics(str, enum.Enum):
    DISTINGUISHABLE = "distinguishable"
    BOSON = "boson"
    FERMION = "fermion"

    def __str__(self):
        return self.value


class EvolutionError(ValueError):
    """Rows are not an isometry, or break the identity constraint."""


# Bell amplitudes as 2x2 matrices M[s1, s2] over (up, down) of particle 1 and 2
_BELL_M = {
    BellOutcome.PSI_MINUS: np.array([[0, 1], [-1, 0]]) / S2,
    BellOutcome.PSI_PLUS: np.array([[0, 1], [1, 0]]) / S2,
    BellOutcome.PHI_MINUS: np.array([[1, 0], [0, -1]]) / S2,
    BellOutcome.PHI_PLUS: np.array([[1, 0], [0, 1]]) / S2,
}
_M_STACK = np.stack([_BELL_M[k] for k in BELL_ORDER]).astype(complex)


@dataclass(frozen=True)
class LinearEvolution:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        rows = [np.asarray(r, dtype=complex).reshape(-1) for r in (self.a, self.b, self.c, self.d)]
        n = rows[0].size
        if n < 4 or any(r.size != n for r in rows):
            raise EvolutionError("rows must share one length N >= 4")
        for name, r in zip("abcd", rows):
            r.setflags(write=False)
            object.__setattr__(self, name, r)

    @classmethod
    def from_rows(cls, v) -> LinearEvolution:
        v = np.asarray(v)
        return cls(v[0], v[1], v[2], v[3])

    @property
    def n_modes(self) -> int:
        return self.a.size

    @property
    def rows(self) -> np.ndarray:
        return np.stack([self.a, self.b, self.c, self.d])

    def check(self, st: Statistics | str) -> None:
        st = Statistics(st)
        v = self.rows
        if st is Statistics.DISTINGUISHABLE:
            # each particle's pair of rows orthonormal; supports split in halves
            for pair in (v[:2], v[2:]):
                if not np.allclose(pair.conj() @ pair.T, np.eye(2), atol=ISOMETRY_TOL, rtol=0):
                    raise EvolutionError("single-particle rows are not orthonormal")
            n = self.n_modes
            if n % 2:
                raise EvolutionError("distinguishable evolutions need an even number of modes")
            h = n // 2
            if np.max(np.abs(v[:2, h:]), initial=0) > ISOMETRY_TOL or np.max(np.abs(v[2:, :h]), initial=0) > ISOMETRY_TOL:
                raise EvolutionError("particles must keep disjoint mode supports")
        elif not np.allclose(v.conj() @ v.T, np.eye(4), atol=ISOMETRY_TOL, rtol=0):
            raise EvolutionError("rows a, b, c, d are not orthonormal")

    def permuted(self, perm) -> LinearEvolution:
        """Relabel output modes: new mode perm[i] gets old mode i."""
        v = np.zeros_like(self.rows)
        v[:, np.asarray(perm)] = self.rows
        return LinearEvolution.from_rows(v)

    def to_json(self) -> str:
        return json.dumps({"n_modes": self.n_modes,
                           "rows": {k: [[float(z.real), float(z.imag)] for z in getattr(self, k)]
                                    for k in "abcd"}})

    @classmethod
    def from_json(cls, text: str) -> LinearEvolution:
        data = json.loads(text)
        rows = [[complex(re, im) for re, im in data["rows"][k]] for k in "abcd"]
        ev = cls(*rows)
        if ev.n_modes != data["n_modes"]:
            raise EvolutionError("n_modes disagrees with row length")
        return ev


def single_scheme() -> LinearEvolution:
    """Two-of-four analyzer on four modes: every input spin state is split
    evenly over two output modes, with the second particle picking up a
    relative minus sign."""
    h = 1 / S2
    return LinearEvolution(np.array([1, 0, 1, 0]) * h, np.array([0, 1, 0, 1]) * h,
                           np.array([1, 0, -1, 0]) * h, np.array([0, 1, 0, -1]) * h)


def identity_scheme(n_modes: int = 4) -> LinearEvolution:
    eye = np.eye(n_modes)
    h = n_modes // 2
    return LinearEvolution(eye[0], eye[1], eye[h], eye[h + 1])


# --- amplitudes ------------------------------------------------------------------

@lru_cache(maxsize=None)
def patterns(n_modes: int, st: Statistics) -> tuple[tuple[int, int], ...]:
    """Detection patterns as 0-based index pairs; ordered for distinguishable
    particles, i <= j for bosons, i < j for fermions."""
    r = range(n_modes)
    if st is Statistics.DISTINGUISHABLE:
        return tuple(itertools.product(r, r))
    if st is Statistics.BOSON:
        return tuple(itertools.combinations_with_replacement(r, 2))
    return tuple(itertools.combinations(r, 2))


@lru_cache(maxsize=None)
def _index(n_modes: int, st: Statistics):
    p = np.array(patterns(n_modes, st), dtype=int).reshape(-1, 2)
    return p[:, 0], p[:, 1]


def _ordered_tensors(v: np.ndarray) -> np.ndarray:
    """T[k, i, j]: amplitude of particle 1 in mode i and particle 2 in mode j for Bell input k."""
    return np.einsum("si,kst,tj->kij", v[:2], _M_STACK, v[2:], optimize=False)


def _pattern_amps(t: np.ndarray, st: Statistics) -> np.ndarray:
    n = t.shape[-1]
    i, j = _index(n, st)
    if st is Statistics.DISTINGUISHABLE:
        return t[:, i, j]
    if st is Statistics.BOSON:
        amp = t[:, i, j] + t[:, j, i]
        diag = i == j
        amp[:, diag] = S2 * t[:, i[diag], i[diag]]
        return amp
    return t[:, i, j] - t[:, j, i]


def _pattern_amps_adjoint(g: np.ndarray, n: int, st: Statistics) -> np.ndarray:
    i, j = _index(n, st)
    gt = np.zeros((g.shape[0], n, n), dtype=complex)
    if st is Statistics.DISTINGUISHABLE:
        gt[:, i, j] = g
    elif st is Statistics.BOSON:
        off = i != j
        np.add.at(gt, (slice(None), i[off], j[off]), g[:, off])
        np.add.at(gt, (slice(None), j[off], i[off]), g[:, off])
        gt[:, i[~off], i[~off]] += S2 * g[:, ~off]
    else:
        np.add.at(gt, (slice(None), i, j), g)
        np.add.at(gt, (slice(None), j, i), -g)
    return gt


def amplitude_matrix(ev: LinearEvolution, st: Statistics | str) -> np.ndarray:
    """Shape (4, n_patterns): amplitudes per Bell input (BELL_ORDER) and pattern."""
    st = Statistics(st)
    return _pattern_amps(_ordered_tensors(ev.rows), st)


def _key(p: tuple[int, int], st: Statistics):
    i, j = p[0] + 1, p[1] + 1
    return (i, j) if st is Statistics.DISTINGUISHABLE else frozenset((i, j))


def evolve_bell(ev: LinearEvolution, st: Statistics | str, kind: BellOutcome | str) -> dict:
    """Pattern -> amplitude. Keys are (i, j) tuples for distinguishable
    particles and frozensets {i, j} for identical ones (1-based modes)."""
    st = Statistics(st)
    ev.check(st)
    k = BELL_ORDER.index(BellOutcome(kind))
    amps = amplitude_matrix(ev, st)[k]
    return {_key(p, st): complex(a) for p, a in zip(patterns(ev.n_modes, st), amps)}


def detection_distribution(ev: LinearEvolution, st: Statistics | str, kind: BellOutcome | str,
                           drop_zeros: bool = True) -> dict:
    probs = {p: abs(a) ** 2 for p, a in evolve_bell(ev, st, kind).items()}
    if drop_zeros:
        probs = {p: v for p, v in probs.items() if v > 1e-15}
    return probs


def diagonal_coefficients(ev: LinearEvolution) -> np.ndarray:
    """Shape (4, N): the i = j coefficient combinations for Psi-, Psi+, Phi-, Phi+:
    a d - b c, a d + b c, a c - b d, a c + b d."""
    a, b, c, d = ev.rows
    return np.stack([a * d - b * c, a * d + b * c, a * c - b * d, a * c + b * d])


# --- discrimination ----------------------------------------------------------------

@dataclass(frozen=True)
class DiscriminationReport:
    success: float
    per_state: dict
    partition: dict  # pattern -> frozenset of consistent BellOutcomes

    def classes(self) -> dict:
        """Consistent set -> patterns showing it."""
        out: dict = {}
        for p, s in self.partition.items():
            out.setdefault(s, set()).add(p)
        return out

    def identified(self) -> dict:
        """BellOutcome -> patterns that single it out."""
        out: dict = {}
        for p, s in self.partition.items():
            if len(s) == 1:
                out.setdefault(next(iter(s)), set()).add(p)
        return out


def _hard_success(probs: np.ndarray, tol: float) -> np.ndarray:
    present = probs >= tol
    unique = present.sum(axis=0) == 1
    return np.where(unique & present, probs, 0.0).sum(axis=1)


def discrimination_success(ev: LinearEvolution, st: Statistics | str, tol: float = DEFAULT_TOL) -> DiscriminationReport:
    st = Statistics(st)
    ev.check(st)
    probs = np.abs(amplitude_matrix(ev, st)) ** 2
    per = _hard_success(probs, tol)
    partition = {}
    for col, p in enumerate(patterns(ev.n_modes, st)):
        members = frozenset(BELL_ORDER[k] for k in range(4) if probs[k, col] >= tol)
        if members:
            partition[_key(p, st)] = members
    return DiscriminationReport(float(np.clip(per.mean(), 0, 1)),
                                {k: float(v) for k, v in zip(BELL_ORDER, per)}, partition)


# --- optimizer ---------------------------------------------------------------------

def _generator(theta: np.ndarray, n: int, mask: np.ndarray | None) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    a = np.zeros((n, n), dtype=complex)
    a[iu] = theta[:m] + 1j * theta[m:2 * m]
    a = a - a.conj().T
    a[np.diag_indices(n)] = 1j * theta[2 * m:]
    if mask is not None:
        a = a * mask
    return a


def _generator_adjoint(ga: np.ndarray, n: int, mask: np.ndarray | None) -> np.ndarray:
    if mask is not None:
        ga = ga * mask
    iu = np.triu_indices(n, 1)
    lo = (iu[1], iu[0])
    return np.concatenate([ga[iu].real - ga[lo].real, ga[iu].imag + ga[lo].imag,
                           np.diag(ga).imag])


def _expm_skew(a: np.ndarray):
    """exp(A) for anti-Hermitian A via the Hermitian eigenproblem of -iA."""
    lam, w = np.linalg.eigh(-1j * a)
    u = (w * np.exp(1j * lam)) @ w.conj().T
    return u, lam, w


def _expm_adjoint(lam: np.ndarray, w: np.ndarray, gu: np.ndarray) -> np.ndarray:
    """Pull a gradient on U = exp(A) back to A (Frechet derivative at A^dagger)."""
    b = -1j * lam
    eb = np.exp(b)
    diff = b[:, None] - b[None, :]
    same = np.abs(diff) < 1e-12
    gamma = np.where(same, eb[:, None], (eb[:, None] - eb[None, :]) / np.where(same, 1, diff))
    return w @ (gamma * (w.conj().T @ gu @ w)) @ w.conj().T


def _rows_from_unitary(u: np.ndarray, st: Statistics) -> np.ndarray:
    if st is Statistics.DISTINGUISHABLE:
        h = u.shape[0] // 2
        return u[[0, 1, h, h + 1]]
    return u[:4]


def _soft_objective(theta: np.ndarray, n: int, st: Statistics, mask, tau: float):
    """Smoothed success and its gradient. A pattern's mass for state k is
    discounted by exp(-(mass of the other states on it) / tau)."""
    a = _generator(theta, n, mask)
    u, lam, w = _expm_skew(a)
    v = _rows_from_unitary(u, st)
    t = _ordered_tensors(v)
    amp = _pattern_amps(t, st)
    p = amp.real ** 2 + amp.imag ** 2
    q = p.sum(axis=0) - p
    wgt = np.exp(-q / tau)
    pw = p * wgt
    f = pw.sum() / 4
    # df/dP_j = (W_j - sum_{k != j} P_k W_k / tau) / 4
    dp = (wgt - (pw.sum(axis=0) - pw) / tau) / 4
    gt = _pattern_amps_adjoint(2 * dp * amp, n, st)
    r1, r2 = v[:2], v[2:]
    g1 = np.einsum("kst,tj,kij->si", _M_STACK.conj(), r2.conj(), gt, optimize=False)
    g2 = np.einsum("kst,si,kij->tj", _M_STACK.conj(), r1.conj(), gt, optimize=False)
    gu = np.zeros_like(u)
    idx = [0, 1, n // 2, n // 2 + 1] if st is Statistics.DISTINGUISHABLE else [0, 1, 2, 3]
    gu[idx[:2]] = g1
    gu[idx[2:]] = g2
    ga = _expm_adjoint(lam, w, gu)
    return f, _generator_adjoint(ga, n, mask)


def _mask(n: int, st: Statistics) -> np.ndarray | None:
    if st is not Statistics.DISTINGUISHABLE:
        return None
    h = n // 2
    m = np.zeros((n, n))
    m[:h, :h] = m[h:, h:] = 1
    return m


def evolution_from_params(theta: np.ndarray, n: int, st: Statistics | str) -> LinearEvolution:
    st = Statistics(st)
    u, _, _ = _expm_skew(_generator(np.asarray(theta, float), n, _mask(n, st)))
    return LinearEvolution.from_rows(_rows_from_unitary(u, st))


@dataclass
class OptimizationResult:
    best: LinearEvolution
    report: DiscriminationReport
    trace: list = field(default_factory=list)  # per restart: (restart, seed, soft, hard)
    best_restart: int = 0


def optimize_discrimination(st: Statistics | str, n_modes: int, restarts: int, seed: int,
                            steps: int = 200, tau: float = 0.2, stages: int = 26,
                            anneal: float = 0.5, tol: float = DEFAULT_TOL) -> OptimizationResult:
    """Best linear analyzer found from `restarts` seeded random starts.

    Each start draws a random anti-Hermitian generator, then runs L-BFGS on the
    smoothed success for `stages` temperatures (tau, tau*anneal, ...), at most
    `steps` iterations each. Scores are the hard unique-identification metric.
    """
    st = Statistics(st)
    if n_modes < 4 or restarts < 1 or steps < 1 or stages < 1:
        raise ValueError("need n_modes >= 4, restarts >= 1, steps >= 1, stages >= 1")
    if st is Statistics.DISTINGUISHABLE and n_modes % 2:
        raise ValueError("distinguishable particles need an even number of modes")
    mask = _mask(n_modes, st)
    trace = []
    best = None
    for r in range(restarts):
        sub = seed + r
        theta = make_rng(sub).normal(scale=np.pi, size=n_modes * n_modes)
        t = tau
        soft = 0.0
        for _ in range(stages):
            res = minimize(lambda x: tuple(-y for y in _soft_objective(x, n_modes, st, mask, t)),
                           theta, jac=True, method="L-BFGS-B", options={"maxiter": steps})
            theta, soft = res.x, -float(res.fun)
            t *= anneal
        ev = evolution_from_params(theta, n_modes, st)
        rep = discrimination_success(ev, st, tol)
        trace.append((r, sub, soft, rep.success))
        if best is None or rep.success > best[1].success:  # strict: lowest index wins ties
            best = (ev, rep, r)
    return OptimizationResult(best[0], best[1], trace, best[2])


def certify_no_perfect(st: Statistics | str, n_modes: int, restarts: int, seed: int, **kw) -> dict:
    res = optimize_discrimination(st, n_modes, restarts, seed, **kw)
    return {"statistics": str(Statistics(st)), "n_modes": n_modes, "restarts": restarts, "seed": seed,
            "max_success": res.report.success, "gap_to_one": 1.0 - res.report.success,
            "best_restart": res.best_restart}
