"""Product basis |a b; c> for two atoms and one cavity mode, sparse kets over it,
and the handful of operators the dressed-state model needs.

Atom levels are labelled 1 (ground), 2 (excited) and, for open atoms, 3 (the
extra ground state that the cavity does not couple to).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

AMP_TOL = 1e-12
_PRUNE = 1e-15


@dataclass(frozen=True)
class AtomKind:
    """Closed two-level atoms, or open ones with decay rates to levels 1 and 3.

    Use ``AtomKind()`` for closed atoms and ``AtomKind.open(g21, g23)`` for open.
    """

    gamma21: float | None = None
    gamma23: float | None = None

    def __post_init__(self):
        if (self.gamma21 is None) != (self.gamma23 is None):
            raise ValueError("open atoms need both gamma21 and gamma23")
        if self.gamma21 is not None and not (self.gamma21 > 0 and self.gamma23 > 0):
            raise ValueError("open-atom decay rates must be strictly positive")

    @classmethod
    def open(cls, gamma21: float, gamma23: float) -> "AtomKind":
        return cls(float(gamma21), float(gamma23))

    @property
    def is_open(self) -> bool:
        return self.gamma21 is not None

    @property
    def levels(self) -> tuple[int, ...]:
        return (1, 2, 3) if self.is_open else (1, 2)


CLOSED = AtomKind()


@dataclass(frozen=True, order=True)
class FockProduct:
    """Basis label |atom1 atom2; photons>."""

    atom1: int
    atom2: int
    photons: int

    def __post_init__(self):
        if self.atom1 not in (1, 2, 3) or self.atom2 not in (1, 2, 3):
            raise ValueError(f"atom levels must be 1, 2 or 3, got {self.atom1}, {self.atom2}")
        if self.photons < 0:
            raise ValueError("photon number must be non-negative")

    @property
    def excitation(self) -> int:
        """Atoms in level 2 plus photons; conserved by the interaction."""
        return (self.atom1 == 2) + (self.atom2 == 2) + self.photons

    def swapped(self) -> "FockProduct":
        return FockProduct(self.atom2, self.atom1, self.photons)

    def __str__(self):
        return f"|{self.atom1}{self.atom2};{self.photons}>"


@dataclass(frozen=True)
class StateVector:
    """Sparse ket: a mapping from FockProduct to complex amplitude.

    ``open`` records whether the atoms are three-level (open) or two-level, so
    that traced density matrices come out 9x9 or 4x4.
    """

    amplitudes: Mapping[FockProduct, complex] = field(default_factory=dict)
    open: bool = False

    def __post_init__(self):
        allowed = (1, 2, 3) if self.open else (1, 2)
        clean = {}
        for basis, amp in self.amplitudes.items():
            if basis.atom1 not in allowed or basis.atom2 not in allowed:
                raise ValueError(f"{basis} is not valid for {'open' if self.open else 'closed'} atoms")
            amp = complex(amp)
            if abs(amp) > _PRUNE:
                clean[basis] = amp
        object.__setattr__(self, "amplitudes", MappingProxyType(clean))

    def __reduce__(self):
        # mapping proxies do not pickle; rebuild from a plain dict
        return type(self), (dict(self.amplitudes), self.open)

    @classmethod
    def from_terms(cls, terms: Mapping[tuple[int, int, int], complex], open: bool = False):
        """Build from ``{(a, b, c): amplitude}``."""
        return cls({FockProduct(*k): v for k, v in terms.items()}, open=open)

    def _check(self, other: "StateVector"):
        if self.open != other.open:
            raise ValueError("cannot combine closed- and open-atom states")

    def __add__(self, other: "StateVector") -> "StateVector":
        self._check(other)
        out = dict(self.amplitudes)
        for k, v in other.amplitudes.items():
            out[k] = out.get(k, 0) + v
        return StateVector(out, self.open)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return self + (-1) * other

    def __mul__(self, scalar: complex) -> "StateVector":
        return StateVector({k: scalar * v for k, v in self.amplitudes.items()}, self.open)

    __rmul__ = __mul__

    def __neg__(self):
        return -1 * self

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        self._check(other)
        a = self.amplitudes
        return sum((a[k].conjugate() * v for k, v in other.amplitudes.items() if k in a), 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(v) ** 2 for v in self.amplitudes.values()))

    def is_zero(self, tol: float = AMP_TOL) -> bool:
        return all(abs(v) <= tol for v in self.amplitudes.values())

    def manifolds(self) -> set[int]:
        return {k.excitation for k in self.amplitudes}

    def swap_atoms(self) -> "StateVector":
        return StateVector({k.swapped(): v for k, v in self.amplitudes.items()}, self.open)

    def allclose(self, other: "StateVector", tol: float = AMP_TOL) -> bool:
        return (self - other).is_zero(tol)

    def __repr__(self):
        if not self.amplitudes:
            return "StateVector(0)"
        terms = " + ".join(f"({v:.6g}){k}" for k, v in sorted(self.amplitudes.items()))
        return f"StateVector({terms})"


def ket(atom1: int, atom2: int, photons: int, open: bool = False) -> StateVector:
    return StateVector({FockProduct(atom1, atom2, photons): 1.0}, open=open)


def zero(open: bool = False) -> StateVector:
    return StateVector({}, open=open)


def _levels(v: StateVector) -> tuple[int, ...]:
    return (1, 2, 3) if v.open else (1, 2)


def collective_lower(v: StateVector, from_level: int = 2, to_level: int = 1) -> StateVector:
    """Apply sigma^(1) + sigma^(2), where sigma moves one atom from ``from_level``
    to ``to_level``. Despite the name it also covers the raising direction."""
    levels = _levels(v)
    if from_level == to_level or from_level not in levels or to_level not in levels:
        raise ValueError(f"invalid level pair {from_level}->{to_level} for "
                         f"{'open' if v.open else 'closed'} atoms")
    out: dict[FockProduct, complex] = {}
    for b, amp in v.amplitudes.items():
        if b.atom1 == from_level:
            k = FockProduct(to_level, b.atom2, b.photons)
            out[k] = out.get(k, 0) + amp
        if b.atom2 == from_level:
            k = FockProduct(b.atom1, to_level, b.photons)
            out[k] = out.get(k, 0) + amp
    return StateVector(out, v.open)


def photon_create(v: StateVector) -> StateVector:
    out = {FockProduct(b.atom1, b.atom2, b.photons + 1): amp * math.sqrt(b.photons + 1)
           for b, amp in v.amplitudes.items()}
    return StateVector(out, v.open)


def photon_annihilate(v: StateVector) -> StateVector:
    out = {FockProduct(b.atom1, b.atom2, b.photons - 1): amp * math.sqrt(b.photons)
           for b, amp in v.amplitudes.items() if b.photons > 0}
    return StateVector(out, v.open)


def apply_hamiltonian(v: StateVector, g: float) -> StateVector:
    """Interaction-picture Tavis-Cummings coupling with equal couplings ``g``:
    g * [(sum_i sigma_{2->1}^(i)) a^dag + (sum_i sigma_{1->2}^(i)) a] acting on ``v``.
    """
    down = collective_lower(photon_create(v), 2, 1)
    up = collective_lower(photon_annihilate(v), 1, 2)
    return g * (down + up)


def basis_index(atom1: int, atom2: int, open: bool = False) -> int:
    """Row of |atom1 atom2> in the atoms-only matrix: |11>,|12>,|21>,|22> for closed
    atoms, |11>,|12>,|13>,|21>,...,|33> for open ones."""
    d = 3 if open else 2
    return (atom1 - 1) * d + (atom2 - 1)


Mixture = Union[StateVector, Sequence[tuple[float, StateVector]]]


def partial_trace_field(v_or_mixture: Mixture) -> np.ndarray:
    """Trace out the cavity mode from a pure state or from ``[(weight, ket), ...]``.

    Returns the 4x4 (closed) or 9x9 (open) atoms-only density matrix.
    """
    if isinstance(v_or_mixture, StateVector):
        mixture: Iterable[tuple[float, StateVector]] = [(1.0, v_or_mixture)]
    else:
        mixture = list(v_or_mixture)
    kinds = {v.open for _, v in mixture}
    if len(kinds) > 1:
        raise ValueError("mixture combines closed- and open-atom states")
    is_open = kinds.pop() if kinds else False
    dim = 9 if is_open else 4
    rho = np.zeros((dim, dim), dtype=complex)
    for weight, v in mixture:
        by_photon: dict[int, np.ndarray] = {}
        for b, amp in v.amplitudes.items():
            col = by_photon.setdefault(b.photons, np.zeros(dim, dtype=complex))
            col[basis_index(b.atom1, b.atom2, is_open)] += amp
        for col in by_photon.values():
            rho += weight * np.outer(col, col.conj())
    return rho
