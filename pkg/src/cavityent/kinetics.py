"""Rate equations over dressed-state populations.

Transitions between dressed states are incoherent, driven by three channels:
collective spontaneous emission (rate Gamma, plus Gamma23 into level 3 for
open atoms), cavity pumping (Pi) and cavity leakage (K). Every rate is
(channel strength) x |<to|operator|from>|^2, evaluated with the ``fock``
operators, so nothing is entered by hand.

The generator is written column-wise: dP/dt = M @ P with M[to, from].
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping, Union

import numpy as np
from scipy.linalg import expm
from scipy.sparse.csgraph import connected_components

from .dressed import DressedLadder, DressedState, build_ladder, spectator_ladder
from .fock import AtomKind, collective_lower, photon_annihilate, photon_create

SINK = "33"


class Channel(str, enum.Enum):
    DECAY21 = "decay21"
    DECAY23 = "decay23"
    PUMP = "pump"
    LEAK = "leak"


class DegenerateSteadyStateError(RuntimeError):
    """The non-dark generator has more than one closed class (or none)."""


@dataclass(frozen=True)
class ModelParams:
    """Physical rates and model switches.

    ``gamma`` is Gamma for closed atoms and Gamma21 for open ones; setting
    ``gamma23`` makes the atoms open. ``leak_multiplier`` maps a manifold n to
    a factor applied to K for leakage out of that manifold.
    """

    gamma: float = 1.0
    leak: float = 0.0
    pump: float = 0.0
    g: float = 1.0
    n_max: int = 2
    leak_multiplier: Mapping[int, float] = field(default_factory=dict)
    gamma23: float | None = None
    strict_collective_decay: bool = False

    def __post_init__(self):
        rates = [self.gamma, self.leak, self.pump]
        if self.gamma23 is not None:
            rates.append(self.gamma23)
        if any(not (r >= 0) for r in rates):
            raise ValueError("rates must be non-negative")
        if not self.gamma > 0:
            raise ValueError("gamma must be strictly positive (rates are expressed in units of it)")
        if self.gamma23 is not None and not self.gamma23 > 0:
            raise ValueError("gamma23 must be strictly positive for open atoms")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError("n_max must be a positive integer")
        mult = {int(n): float(f) for n, f in dict(self.leak_multiplier).items()}
        if any(not f > 0 for f in mult.values()):
            raise ValueError("leak multipliers must be positive")
        object.__setattr__(self, "leak_multiplier", MappingProxyType(mult))
        object.__setattr__(self, "n_max", int(self.n_max))

    def __reduce__(self):
        return type(self), (self.gamma, self.leak, self.pump, self.g, self.n_max,
                            dict(self.leak_multiplier), self.gamma23,
                            self.strict_collective_decay)

    @property
    def kind(self) -> AtomKind:
        if self.gamma23 is None:
            return AtomKind()
        return AtomKind.open(self.gamma, self.gamma23)

    def leak_factor(self, n: int) -> float:
        return self.leak_multiplier.get(n, 1.0)

    def scaled(self, factor: float) -> "ModelParams":
        """Every rate multiplied by ``factor``."""
        g23 = None if self.gamma23 is None else self.gamma23 * factor
        return replace(self, gamma=self.gamma * factor, leak=self.leak * factor,
                       pump=self.pump * factor, gamma23=g23)

    def in_units_of_gamma(self) -> "ModelParams":
        return self.scaled(1.0 / self.gamma)


@dataclass(frozen=True)
class RateMatrix:
    labels: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(self.labels), len(self.labels)):
            raise ValueError("matrix shape does not match labels")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(self.labels))

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def rate(self, to: str, frm: str) -> float:
        return float(self.matrix[self.index(to), self.index(frm)])

    @property
    def dark_mask(self) -> np.ndarray:
        """Slots with an all-zero row and column: their population never moves."""
        m = self.matrix
        return ~(m.any(axis=0) | m.any(axis=1))

    @property
    def dark_slots(self) -> tuple[str, ...]:
        return tuple(l for l, d in zip(self.labels, self.dark_mask) if d)


@dataclass(frozen=True)
class PopulationVector:
    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.labels),):
            raise ValueError("values do not match labels")
        if (v < -1e-12).any():
            raise ValueError("populations must be non-negative")
        if abs(v.sum() - 1.0) > 1e-10:
            raise ValueError(f"populations must sum to 1, got {v.sum()!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_dict(cls, labels, weights: Mapping[str, float]) -> "PopulationVector":
        labels = tuple(labels)
        unknown = set(weights) - set(labels)
        if unknown:
            raise KeyError(f"unknown slots {sorted(unknown)}")
        return cls(labels, np.array([weights.get(l, 0.0) for l in labels]))

    def __getitem__(self, label: str) -> float:
        return float(self.values[self.labels.index(label)])

    def as_dict(self) -> dict[str, float]:
        return {l: float(v) for l, v in zip(self.labels, self.values)}


# --------------------------------------------------------------------------
# transition rates

_OPERATORS = {
    Channel.DECAY21: lambda v: collective_lower(v, 2, 1),
    Channel.DECAY23: lambda v: collective_lower(v, 2, 3),
    Channel.PUMP: photon_create,
    Channel.LEAK: photon_annihilate,
}

Target = Union[DressedState, str]


def _matrix_element_sq(src: DressedState, dst: Target, channel: Channel) -> float:
    w = _OPERATORS[channel](src.vector)
    if isinstance(dst, str):
        if dst != SINK:
            raise ValueError(f"unknown target {dst!r}")
        return sum(abs(a) ** 2 for b, a in w.amplitudes.items() if b.atom1 == b.atom2 == 3)
    if w.open != dst.vector.open:
        return 0.0
    m2 = abs(dst.vector.inner(w)) ** 2
    if dst.spectator:
        # a spectator slot also stands for its atom-swapped twin
        m2 += abs(dst.vector.swap_atoms().inner(w)) ** 2
    return m2


def channel_strength(channel: Channel, params: ModelParams, n_from: int = 0) -> float:
    if channel is Channel.DECAY21:
        return params.gamma
    if channel is Channel.DECAY23:
        if params.gamma23 is None:
            raise ValueError("decay23 needs open atoms")
        return params.gamma23
    if channel is Channel.PUMP:
        return params.pump
    return params.leak * params.leak_factor(n_from)


def transition_rate(src: DressedState, dst: Target, channel: Union[Channel, str],
                    params: ModelParams) -> float:
    """Rate of ``src -> dst`` through one channel, straight from the matrix element.

    ``dst`` may be the string ``SINK`` (both atoms in level 3, any photon number).
    Dark-state bookkeeping is not applied here; see ``build_rate_matrix``.
    """
    channel = Channel(channel)
    if channel is Channel.DECAY23 and not params.kind.is_open:
        raise ValueError("decay23 channel needs open atoms")
    if src.vector.open != params.kind.is_open:
        raise ValueError("state and parameters disagree on the atom kind")
    return channel_strength(channel, params, src.n) * _matrix_element_sq(src, dst, channel)


# --------------------------------------------------------------------------
# generators

@dataclass(frozen=True)
class _Structure:
    labels: tuple[str, ...]
    decay21: np.ndarray
    decay23: np.ndarray
    pump: np.ndarray
    leak: dict[int, np.ndarray]


def _allowed(src: DressedState, dst: Target, channel: Channel, n_max: int, strict: bool) -> bool:
    if channel is Channel.DECAY23:
        if isinstance(dst, str):
            return src.spectator
        if not dst.spectator or src.spectator:
            return False
        return strict or not src.is_dark
    if isinstance(dst, str) or src.spectator != dst.spectator:
        return False
    if src.is_dark or dst.is_dark:
        return False
    if channel is Channel.PUMP:
        return src.n < n_max and dst.n == src.n + 1
    return dst.n == src.n - 1


@lru_cache(maxsize=32)
def _structure(n_max: int, is_open: bool, strict: bool) -> _Structure:
    kind = AtomKind.open(1.0, 1.0) if is_open else AtomKind()
    states: list[Target] = list(build_ladder(n_max, kind).states())
    if is_open:
        states += spectator_ladder(n_max)
        states.append(SINK)
    labels = tuple(s if isinstance(s, str) else s.name for s in states)
    size = len(states)
    mats = {c: np.zeros((size, size)) for c in Channel}
    leak: dict[int, np.ndarray] = {}
    channels = [Channel.DECAY21, Channel.PUMP, Channel.LEAK]
    if is_open:
        channels.append(Channel.DECAY23)
    for j, src in enumerate(states):
        if isinstance(src, str):
            continue  # the sink is absorbing
        for i, dst in enumerate(states):
            if i == j:
                continue
            for ch in channels:
                if not _allowed(src, dst, ch, n_max, strict):
                    continue
                m2 = _matrix_element_sq(src, dst, ch)
                if m2 <= 1e-24:
                    continue
                if ch is Channel.LEAK:
                    leak.setdefault(src.n, np.zeros((size, size)))[i, j] += m2
                else:
                    mats[ch][i, j] += m2
    return _Structure(labels, mats[Channel.DECAY21], mats[Channel.DECAY23],
                      mats[Channel.PUMP], leak)


def _assemble(st: _Structure, params: ModelParams) -> RateMatrix:
    m = params.gamma * st.decay21 + params.pump * st.pump
    if params.gamma23 is not None:
        m = m + params.gamma23 * st.decay23
    for n, u in st.leak.items():
        m = m + params.leak * params.leak_factor(n) * u
    m = m - np.diag(m.sum(axis=0))
    return RateMatrix(st.labels, m)


def _check_pair(ladder: DressedLadder, params: ModelParams):
    if ladder.kind.is_open != params.kind.is_open:
        raise ValueError("ladder and parameters disagree on the atom kind")
    if ladder.n_max != params.n_max:
        raise ValueError(f"ladder has n_max={ladder.n_max}, parameters say {params.n_max}")


def build_rate_matrix(ladder: DressedLadder, params: ModelParams) -> RateMatrix:
    """Generator for closed atoms over {g, dressed states of manifolds 1..n_max}.

    Dark states (chi_o, phi_o^n) get empty rows and columns, so their
    population is frozen. Pumping out of the top manifold is switched off.
    For open atoms this delegates to ``build_open_rate_matrix``.
    """
    _check_pair(ladder, params)
    if params.kind.is_open:
        return build_open_rate_matrix(ladder, params)
    return _assemble(_structure(ladder.n_max, False, False), params)


def build_open_rate_matrix(ladder: DressedLadder, params: ModelParams) -> RateMatrix:
    """Closed-atom generator extended by decay into level 3.

    Bright pair states decay at Gamma23 x ||(s1 + s2) psi||^2 into spectator
    slots (one atom in |3>, the other still coupled to the cavity). Spectators
    are pumped, leak and decay like a single two-level atom and drain at Gamma23
    into the absorbing ``SINK`` slot |33>. Dark states stay isolated unless
    ``params.strict_collective_decay`` is set. In that case their own 2->3
    matrix elements are used too.
    """
    _check_pair(ladder, params)
    if not params.kind.is_open:
        raise ValueError("build_open_rate_matrix needs open-atom parameters")
    return _assemble(_structure(ladder.n_max, True, params.strict_collective_decay), params)


def generator(params: ModelParams) -> RateMatrix:
    """Shortcut: build the ladder implied by ``params`` and its generator."""
    return build_rate_matrix(build_ladder(params.n_max, params.kind), params)


# --------------------------------------------------------------------------
# dynamics

def evolve(m: RateMatrix, p0: PopulationVector, t: float) -> PopulationVector:
    """p(t) = expm(M t) p0 (scaling and squaring), clipped at zero and renormalized."""
    if t < 0:
        raise ValueError("time must be non-negative")
    if m.labels != p0.labels:
        raise ValueError("population labels do not match the generator")
    if t == 0:
        return p0
    # dark slots never move, so only the free block is propagated
    free = np.flatnonzero(~m.dark_mask)
    p = p0.values.copy()
    mass = p[free].sum()
    if free.size and mass > 0:
        q = expm(m.matrix[np.ix_(free, free)] * t) @ p[free]
        q = np.where(q < 0, 0.0, q)
        p[free] = q * (mass / q.sum())
    return PopulationVector(m.labels, p)


def _closed_classes(sub: np.ndarray) -> list[np.ndarray]:
    adj = (sub.T != 0)  # adj[from, to]
    np.fill_diagonal(adj, False)
    ncomp, comp = connected_components(adj, directed=True, connection="strong")
    closed = []
    for c in range(ncomp):
        members = comp == c
        if not adj[np.ix_(members, ~members)].any():
            closed.append(np.flatnonzero(members))
    return closed


def _gth(rates: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible chain by Grassmann-Taksar-Heyman
    elimination. ``rates[i, j]`` is the i -> j rate; no subtractions, so small
    entries keep full relative accuracy."""
    q = np.array(rates, dtype=float)
    np.fill_diagonal(q, 0.0)
    n = len(q)
    for k in range(n - 1, 0, -1):
        s = q[k, :k].sum()
        if s <= 0:
            raise DegenerateSteadyStateError("class is not irreducible")
        q[:k, k] /= s
        q[:k, :k] += np.outer(q[:k, k], q[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ q[:k, k]
    return pi / pi.sum()


def steady_state(m: RateMatrix, p0: PopulationVector) -> PopulationVector:
    """t -> infinity limit of ``evolve``.

    Dark slots keep their initial population. The remaining mass ends up on the
    unique closed communicating class of the non-dark generator, distributed by
    its stationary vector. Raises ``DegenerateSteadyStateError`` when that
    class is not unique, since the answer would then depend on more than p0's
    non-dark mass.
    """
    if m.labels != p0.labels:
        raise ValueError("population labels do not match the generator")
    dark = m.dark_mask
    out = np.where(dark, p0.values, 0.0)
    free = np.flatnonzero(~dark)
    mass = p0.values[free].sum()
    if free.size == 0 or mass == 0:
        return PopulationVector(m.labels, p0.values)
    sub = m.matrix[np.ix_(free, free)]
    closed = _closed_classes(sub)
    if len(closed) != 1:
        names = [[m.labels[free[i]] for i in c] for c in closed]
        raise DegenerateSteadyStateError(
            f"non-dark generator has {len(closed)} closed classes: {names}")
    cls = closed[0]
    pi = _gth(sub[np.ix_(cls, cls)].T)
    out[free[cls]] = mass * pi
    return PopulationVector(m.labels, out)


# --------------------------------------------------------------------------
# closed forms for the closed-atom ladder

def closed_form_populations(gamma: float, leak: float, pump: float) -> tuple[float, float, float, float]:
    """Analytic steady state (P_g, P_s1, P_s2, P_o'2) of the n_max = 2 ladder."""
    G, K, P = gamma, leak, pump
    w = ((3 * G + 2 * K) * (2 * G + K) * (G + K),
         2 * P * (G + K) * (3 * G + 2 * K),
         4 * P ** 2 * (G + K),
         P ** 2 * (3 * G + 2 * K))
    total = math.fsum(w)
    return tuple(x / total for x in w)


def single_excitation_populations(gamma: float, leak: float, pump: float) -> tuple[float, float]:
    """(P_g, P_+ + P_-) for the ladder truncated at n_max = 1."""
    norm = 1.0 / (gamma + leak / 2 + pump)
    return norm * (gamma + leak / 2), norm * pump
