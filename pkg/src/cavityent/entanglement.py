"""Two-atom entanglement measures.

* Wootters concurrence of a 4x4 two-qubit density matrix, via the spectrum of
  rho @ rho_tilde.
* The closed-form concurrence for the population-weighted family
  P_g rho_g + P_s1 rho_s1 + P_s2 rho_s2 + P_o'2 rho_o'2, optionally mixed with
  a frozen singlet weight of one half, and the gradient of its pre-max argument.
* Singlet (psi-) fraction for the 9x9 two-qutrit matrices of open atoms.

Basis ordering is |11>,|12>,|21>,|22> (and |11>,|12>,|13>,|21>,...,|33>).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .fock import basis_index

SQRT_HALF = 1.0 / math.sqrt(2.0)

# sigma_y (x) sigma_y in the |11>,|12>,|21>,|22> ordering
SIGMA_YY = np.fliplr(np.diag([-1.0, 1.0, 1.0, -1.0]))

PSI_PLUS = np.array([0.0, SQRT_HALF, SQRT_HALF, 0.0])
PSI_MINUS = np.array([0.0, SQRT_HALF, -SQRT_HALF, 0.0])

RHO_G = np.diag([1.0, 0.0, 0.0, 0.0])
RHO_S1 = np.array([[0.5, 0, 0, 0], [0, 0.25, 0.25, 0], [0, 0.25, 0.25, 0], [0, 0, 0, 0]])
RHO_S2 = np.array([[0.25, 0, 0, 0], [0, 0.25, 0.25, 0], [0, 0.25, 0.25, 0], [0, 0, 0, 0.25]])
RHO_OPRIME2 = np.diag([0.5, 0.0, 0.0, 0.5])


def embed_qubit_vector(v: np.ndarray) -> np.ndarray:
    """Place a two-qubit vector into the {1,2} x {1,2} block of the qutrit space."""
    out = np.zeros(9, dtype=np.asarray(v).dtype)
    for a in (1, 2):
        for b in (1, 2):
            out[basis_index(a, b, open=True)] = v[basis_index(a, b)]
    return out


def embed_qubit_matrix(rho: np.ndarray) -> np.ndarray:
    idx = [basis_index(a, b, open=True) for a in (1, 2) for b in (1, 2)]
    out = np.zeros((9, 9), dtype=np.asarray(rho).dtype)
    out[np.ix_(idx, idx)] = rho
    return out


def projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, np.conj(v))


@dataclass(frozen=True)
class PopulationSplit:
    """Populations of the slot families that make up the traced atom state.

    ``p_s2`` and ``p_oprime2`` collect every manifold n >= 2 (all of those
    states trace to the same atom matrices). ``p_dark`` is the total weight of
    chi_o and phi_o^n (each traces to the singlet), ``p_33`` the weight of
    |33> for open atoms.
    """

    p_g: float = 0.0
    p_s1: float = 0.0
    p_s2: float = 0.0
    p_oprime2: float = 0.0
    p_dark: float | None = None
    p_33: float | None = None

    def __post_init__(self):
        vals = [getattr(self, f.name) for f in fields(self)]
        present = [v for v in vals if v is not None]
        if any(v < -1e-12 for v in present):
            raise ValueError("populations must be non-negative")
        if abs(math.fsum(present) - 1.0) > 1e-10:
            raise ValueError(f"split must sum to 1, got {math.fsum(present)!r}")

    @property
    def core(self) -> tuple[float, float, float, float]:
        return (self.p_g, self.p_s1, self.p_s2, self.p_oprime2)


def assemble_reduced(split: PopulationSplit) -> np.ndarray:
    """Atoms-only density matrix for ``split``: 4x4, or 9x9 when ``p_33`` is set."""
    rho = (split.p_g * RHO_G + split.p_s1 * RHO_S1 + split.p_s2 * RHO_S2
           + split.p_oprime2 * RHO_OPRIME2)
    if split.p_dark:
        rho = rho + split.p_dark * projector(PSI_MINUS)
    if split.p_33 is None:
        return rho.astype(complex)
    out = embed_qubit_matrix(rho).astype(complex)
    i33 = basis_index(3, 3, open=True)
    out[i33, i33] += split.p_33
    return out


def spin_flip(rho: np.ndarray) -> np.ndarray:
    return SIGMA_YY @ rho.conj() @ SIGMA_YY


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def wootters_lambdas(rho: np.ndarray) -> np.ndarray:
    """Square roots of the eigenvalues of rho @ rho_tilde, descending.

    The values are taken as singular values of sqrt(rho) Y sqrt(rho)^*, whose
    Gram matrix is similar to rho @ rho_tilde. That keeps tiny eigenvalues
    accurate, where square-rooting a round-off-sized eigenvalue would not. A
    general eigensolve of the product is still run as a sanity check.
    """
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValueError("concurrence needs a 4x4 two-qubit density matrix; "
                         "use bell_fraction for the 9x9 open-atom case")
    ev = np.linalg.eigvals(rho @ spin_flip(rho))
    scale = max(1.0, float(np.abs(ev).max()))
    if np.abs(ev.imag).max() > 1e-10 * scale:
        raise ValueError(f"rho @ rho_tilde has complex eigenvalues {ev}; is rho a density matrix?")
    if ev.real.min() < -1e-10 * scale:
        raise ValueError(f"rho @ rho_tilde has negative eigenvalues {ev.real}")
    root = _sqrtm_psd((rho + rho.conj().T) / 2)
    return np.linalg.svd(root @ SIGMA_YY @ root.conj(), compute_uv=False)


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence max(l1 - l2 - l3 - l4, 0) of a two-qubit state."""
    lam = wootters_lambdas(rho)
    return max(float(lam[0] - lam[1] - lam[2] - lam[3]), 0.0)


def _radicand(pg: float, ps1: float, ps2: float, po: float) -> float:
    return (ps2 + 2 * po) * (2 * po + ps2 + 4 * pg + 2 * ps1)


def _inner_split(split: PopulationSplit) -> tuple[tuple[float, float, float, float], bool]:
    if split.p_33:
        raise ValueError("closed form covers closed atoms only (p_33 present)")
    dark = split.p_dark or 0.0
    if dark == 0.0:
        return split.core, False
    if abs(dark - 0.5) > 1e-12:
        raise ValueError(f"closed form needs p_dark of 0 or 1/2, got {dark}")
    return tuple(2.0 * p for p in split.core), True


def closed_form_argument(split: PopulationSplit) -> float:
    """The expression inside max(., 0) of the closed-form concurrence.

    Without a dark weight: (P_s1 + P_s2)/2 - sqrt(S)/2, with
    S = (P_s2 + 2P_o'2)(2P_o'2 + P_s2 + 4P_g + 2P_s1). With dark weight 1/2 the
    other populations are renormalized to the bright half (p = 2P) and the
    value is 1/2 - (p_s1 + p_s2)/4 - sqrt(S(p))/4.
    """
    (pg, ps1, ps2, po), half_dark = _inner_split(split)
    root = math.sqrt(max(_radicand(pg, ps1, ps2, po), 0.0))
    if half_dark:
        return 0.5 - 0.25 * (ps1 + ps2) - 0.25 * root
    return 0.5 * (ps1 + ps2) - 0.5 * root


def concurrence_closed_form(split: PopulationSplit) -> float:
    return max(closed_form_argument(split), 0.0)


def concurrence_gradient(split: PopulationSplit) -> np.ndarray:
    """Partial derivatives of the pre-max closed form with respect to
    (P_g, P_s1, P_s2, P_o'2), treated as independent variables.

    Only defined at interior points (every population strictly positive).
    """
    if split.p_dark or split.p_33:
        raise ValueError("gradient is defined for the four-slot closed split only")
    pg, ps1, ps2, po = split.core
    if min(pg, ps1, ps2, po) <= 0:
        raise ValueError("gradient needs an interior point (all populations > 0)")
    a = 1.0 / math.sqrt(4 * ps2 * pg + 2 * ps1 * ps2 + ps2 ** 2 + 4 * ps2 * po
                        + 8 * po * pg + 4 * po * ps1 + 4 * po ** 2)
    return np.array([
        -a / 4 * (8 * po + 4 * ps2),
        0.5 - a / 4 * (4 * po + 2 * ps2),
        0.5 - a / 4 * (4 * pg + 2 * ps1 + 2 * ps2 + 4 * po),
        -a / 4 * (4 * ps2 + 8 * pg + 4 * ps1 + 8 * po),
    ])


def bell_fraction(rho: np.ndarray) -> float:
    """Singlet overlap <psi-|rho|psi-> of a 9x9 two-qutrit density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (9, 9):
        raise ValueError("bell_fraction expects a 9x9 two-qutrit density matrix")
    v = embed_qubit_vector(PSI_MINUS)
    return float(np.real(v.conj() @ rho @ v))


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> None:
    """Raise ValueError unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho)
    if rho.shape not in ((4, 4), (9, 9)):
        raise ValueError(f"unexpected shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > 1e-12:
        raise ValueError("not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("not positive semidefinite")
