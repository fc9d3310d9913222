"""Dressed-state ladder of two atoms coupled to one cavity mode.

Manifold n = 1 holds the dark state chi_o and the bright pair chi_+/-; every
n >= 2 manifold holds phi_o, phi_o', phi_+ and phi_-. The coefficients are the
fixed 1/sqrt(2) and 1/2 patterns of the model. They are exact eigenstates only
for n = 1; ``eigen_residual`` reports how far each one is from an eigenstate.

Open atoms also need states with one atom already in level 3. Those are the
"spectator" states built by ``spectator_ladder``: atom 1 in |3> and the other
atom doing single-atom Jaynes-Cummings dynamics with the cavity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .fock import CLOSED, AtomKind, StateVector, apply_hamiltonian, ket

SQRT_HALF = 1.0 / math.sqrt(2.0)
HALF = 0.5

DARK_TAGS = ("o",)


@dataclass(frozen=True)
class DressedState:
    n: int
    tag: str
    vector: StateVector
    spectator: bool = False

    @property
    def name(self) -> str:
        """Slot label: ``g``, ``o1``, ``+1``, ``o'2``, ... and ``3g``, ``3+1``, ..."""
        prefix = "3" if self.spectator else ""
        if self.tag == "g":
            return prefix + "g"
        return f"{prefix}{self.tag}{self.n}"

    @property
    def is_dark(self) -> bool:
        return not self.spectator and self.tag in DARK_TAGS


@dataclass(frozen=True)
class DressedLadder:
    ground: DressedState
    manifolds: tuple[tuple[DressedState, ...], ...]
    kind: AtomKind = CLOSED

    @property
    def n_max(self) -> int:
        return len(self.manifolds)

    def manifold(self, n: int) -> tuple[DressedState, ...]:
        if n == 0:
            return (self.ground,)
        return self.manifolds[n - 1]

    def states(self) -> list[DressedState]:
        out = [self.ground]
        for m in self.manifolds:
            out.extend(m)
        return out

    def __getitem__(self, name: str) -> DressedState:
        for s in self.states():
            if s.name == name:
                return s
        raise KeyError(name)


def _n1_states(is_open: bool) -> tuple[DressedState, ...]:
    k = lambda a, b, c: ket(a, b, c, open=is_open)  # noqa: E731
    sym = HALF * (k(1, 2, 0) + k(2, 1, 0))
    return (
        DressedState(1, "o", SQRT_HALF * (k(1, 2, 0) - k(2, 1, 0))),
        DressedState(1, "+", SQRT_HALF * k(1, 1, 1) + sym),
        DressedState(1, "-", SQRT_HALF * k(1, 1, 1) - sym),
    )


def _upper_states(n: int, is_open: bool) -> tuple[DressedState, ...]:
    top, a, b, bottom = (ket(1, 1, n, is_open), ket(1, 2, n - 1, is_open),
                         ket(2, 1, n - 1, is_open), ket(2, 2, n - 2, is_open))
    return (
        DressedState(n, "o", SQRT_HALF * (a - b)),
        DressedState(n, "o'", SQRT_HALF * (top - bottom)),
        DressedState(n, "+", HALF * (top + a + b + bottom)),
        DressedState(n, "-", HALF * (top - a - b + bottom)),
    )


@lru_cache(maxsize=64)
def build_ladder(n_max: int, kind: AtomKind = CLOSED) -> DressedLadder:
    """Ground state |11;0> plus the dressed states of manifolds 1..n_max.

    For open atoms the states are the same (levels 1 and 2 only) but live in the
    three-level product space.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    is_open = kind.is_open
    manifolds = [_n1_states(is_open)]
    manifolds += [_upper_states(n, is_open) for n in range(2, n_max + 1)]
    ground = DressedState(0, "g", ket(1, 1, 0, open=is_open))
    return DressedLadder(ground, tuple(manifolds), kind)


@lru_cache(maxsize=64)
def spectator_ladder(n_max: int) -> tuple[DressedState, ...]:
    """Single-atom dressed states with atom 1 parked in level 3.

    |31;0>, then (|31;n> +/- |32;n-1>)/sqrt(2) for n = 1..n_max. Physically each
    one stands for the symmetric pair of |3b;c> and |b3;c> configurations.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    out = [DressedState(0, "g", ket(3, 1, 0, open=True), spectator=True)]
    for n in range(1, n_max + 1):
        lo, hi = ket(3, 1, n, open=True), ket(3, 2, n - 1, open=True)
        out.append(DressedState(n, "+", SQRT_HALF * (lo + hi), spectator=True))
        out.append(DressedState(n, "-", SQRT_HALF * (lo - hi), spectator=True))
    return tuple(out)


def eigen_residual(s: DressedState, g: float = 1.0) -> float:
    """||H s - <s|H|s> s||: zero when ``s`` is an exact eigenvector of the coupling."""
    hs = apply_hamiltonian(s.vector, g)
    energy = s.vector.inner(hs)
    return (hs - energy * s.vector).norm()
