"""Scenario presets and numeric studies built on the kinetics and entanglement
modules: single runs, (Pi, K) sweeps, P_s1 maximization, the nonlinear-leakage
search and the free-space reference state.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .dressed import DressedLadder, build_ladder, spectator_ladder
from .entanglement import (PopulationSplit, assemble_reduced, bell_fraction,
                           closed_form_argument, concurrence)
from .fock import basis_index, ket, partial_trace_field
from .kinetics import (SINK, ModelParams, PopulationVector, build_rate_matrix,
                       closed_form_populations, steady_state)

log = logging.getLogger(__name__)

SCENARIOS = ("closed_n2", "closed_n1", "closed_asym_start", "open_pi_pulse", "nonlinear_leak")

POPULATION_KEYS = ("p_g", "p_s1", "p_s2", "p_oprime2")


class OptimizerBudgetError(RuntimeError):
    """Raised when the optimizer stops on its iteration budget; carries the best point."""

    def __init__(self, message: str, best: "MaximizeResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class Scenario:
    name: str
    params: ModelParams
    initial: PopulationVector


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    steady: PopulationVector
    split: PopulationSplit
    rho: np.ndarray
    measures: Mapping[str, float | None]


def pi_pulse_initial(ladder: DressedLadder) -> dict[str, float]:
    """Dressed-state weights |<d|12;0>|^2 of the state left by a pi-pulse on one atom."""
    start = ket(1, 2, 0, open=ladder.kind.is_open)
    weights = {s.name: abs(s.vector.inner(start)) ** 2 for s in ladder.manifold(1)}
    return {k: v for k, v in weights.items() if v > 1e-15}


def make_scenario(name: str, *, gamma: float = 1.0, pump: float = 1.0, leak: float = 1.0,
                  gamma23: float | None = None, g: float = 1.0, n_max: int | None = None,
                  leak_multiplier: Mapping[int, float] | None = None, factor: float = 100.0,
                  strict_collective_decay: bool = False) -> Scenario:
    """Preset scenarios.

    closed_n2          closed atoms from |11;0>, ladder up to n = 2
    closed_n1          same, truncated at n = 1
    closed_asym_start  closed atoms after a pi-pulse on one atom
    open_pi_pulse      open atoms after a pi-pulse on one atom
    nonlinear_leak     closed_n2 with leakage out of n = 2 multiplied by ``factor``
    """
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    mult = dict(leak_multiplier or {})
    if name == "closed_n1":
        n_max = 1 if n_max is None else n_max
        if n_max != 1:
            raise ValueError("closed_n1 is the n_max = 1 truncation")
    n_max = 2 if n_max is None else n_max
    if name == "nonlinear_leak":
        if factor < 1:
            raise ValueError("nonlinear leak factor must be >= 1")
        mult.setdefault(2, factor)
    if name == "open_pi_pulse":
        gamma23 = gamma if gamma23 is None else gamma23
    else:
        gamma23 = None
    params = ModelParams(gamma=gamma, leak=leak, pump=pump, g=g, n_max=n_max,
                         leak_multiplier=mult, gamma23=gamma23,
                         strict_collective_decay=strict_collective_decay)
    ladder = build_ladder(n_max, params.kind)
    m = build_rate_matrix(ladder, params)
    if name in ("closed_asym_start", "open_pi_pulse"):
        weights = pi_pulse_initial(ladder)
    else:
        weights = {"g": 1.0}
    return Scenario(name, params, PopulationVector.from_dict(m.labels, weights))


def split_populations(pop: PopulationVector, tol: float = 1e-12) -> PopulationSplit:
    """Group slot populations into the families that share an atom matrix."""
    acc = dict.fromkeys(POPULATION_KEYS, 0.0)
    dark = 0.0
    sink = None
    spectators = 0.0
    for label, p in pop.as_dict().items():
        if label == SINK:
            sink = p
        elif label.startswith("3"):
            spectators += p
        elif label == "g":
            acc["p_g"] += p
        elif label.startswith("o'"):
            acc["p_oprime2"] += p
        elif label.startswith("o"):
            dark += p
        elif label in ("+1", "-1"):
            acc["p_s1"] += p
        else:
            acc["p_s2"] += p
    if spectators > tol:
        raise ValueError(f"{spectators:.3g} population still on one-atom-in-|3> slots")
    return PopulationSplit(**acc, p_dark=dark, p_33=sink)


def reduced_density_matrix(pop: PopulationVector, params: ModelParams) -> np.ndarray:
    """Trace the field out of the dressed-state mixture described by ``pop``."""
    is_open = params.kind.is_open
    states = {s.name: s for s in build_ladder(params.n_max, params.kind).states()}
    mixture = []
    if is_open:
        for s in spectator_ladder(params.n_max):
            states[s.name] = s
    for label, p in pop.as_dict().items():
        if p == 0.0:
            continue
        if label == SINK:
            mixture.append((p, ket(3, 3, 0, open=True)))
            continue
        s = states[label]
        if s.spectator:
            mixture.append((p / 2, s.vector))
            mixture.append((p / 2, s.vector.swap_atoms()))
        else:
            mixture.append((p, s.vector))
    if not mixture:
        return np.zeros((9, 9) if is_open else (4, 4), dtype=complex)
    return partial_trace_field(mixture)


def run_scenario(s: Scenario) -> ScenarioResult:
    m = build_rate_matrix(build_ladder(s.params.n_max, s.params.kind), s.params)
    steady = steady_state(m, s.initial)
    split = split_populations(steady)
    rho = reduced_density_matrix(steady, s.params)
    if s.params.kind.is_open:
        measures = {"bell_fraction": bell_fraction(rho), "script_c": None}
    else:
        measures = {"concurrence": concurrence(rho), "script_c": closed_form_argument(split)}
    return ScenarioResult(s, steady, split, rho, measures)


def truncated_concurrence(split: PopulationSplit) -> float:
    """Concurrence when only the P_g and P_s1 terms are kept (renormalized)."""
    total = split.p_g + split.p_s1
    return concurrence(assemble_reduced(PopulationSplit(split.p_g / total, split.p_s1 / total)))


# --------------------------------------------------------------------------
# sweeps

def grid(lo: float, hi: float, resolution: int) -> np.ndarray:
    """``resolution`` evenly spaced points on (lo, hi]."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if not (0 <= lo < hi):
        raise ValueError("range must satisfy 0 <= lo < hi")
    return lo + (hi - lo) * np.arange(1, resolution + 1) / resolution


@dataclass(frozen=True)
class SweepResult:
    """Grid results, arrays indexed [k_index, pi_index]. Rates in units of Gamma."""

    scenario: str
    pi: np.ndarray
    k: np.ndarray
    populations: Mapping[str, np.ndarray]
    script_c: np.ndarray
    concurrence: np.ndarray
    bell_fraction: np.ndarray | None = None

    def rows(self) -> Iterator[dict[str, float]]:
        """One record per grid point, K-major then Pi."""
        for i, k in enumerate(self.k):
            for j, p in enumerate(self.pi):
                row = {"pi": float(p), "k": float(k)}
                row.update({key: float(v[i, j]) for key, v in self.populations.items()})
                row["script_c"] = float(self.script_c[i, j])
                row["concurrence"] = float(self.concurrence[i, j])
                yield row


def _evaluate_point(args) -> tuple:
    s, pump, leak = args
    params = replace(s.params, pump=pump * s.params.gamma, leak=leak * s.params.gamma)
    res = run_scenario(replace(s, params=params))
    sp = res.split
    if params.kind.is_open:
        return sp.core, math.nan, math.nan, res.measures["bell_fraction"]
    return sp.core, res.measures["script_c"], res.measures["concurrence"], math.nan


def sweep(s: Scenario, pi_range: tuple[float, float] = (0.05, 5.0),
          k_range: tuple[float, float] = (0.05, 5.0), resolution: int = 50,
          workers: int = 1, pi_values: Sequence[float] | None = None,
          k_values: Sequence[float] | None = None) -> SweepResult:
    """Evaluate ``s`` on a (Pi, K) grid given in units of Gamma.

    Points are independent; with ``workers > 1`` they run in a process pool and
    come back in grid order.
    """
    pis = np.asarray(pi_values, dtype=float) if pi_values is not None else grid(*pi_range, resolution)
    ks = np.asarray(k_values, dtype=float) if k_values is not None else grid(*k_range, resolution)
    if (pis <= 0).any() or (ks <= 0).any():
        raise ValueError("sweep grid must be strictly positive")
    tasks = [(s, float(p), float(k)) for k in ks for p in pis]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_evaluate_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        out = [_evaluate_point(t) for t in tasks]
    shape = (len(ks), len(pis))
    core = np.array([o[0] for o in out]).reshape(shape + (4,))
    pops = {key: core[..., i] for i, key in enumerate(POPULATION_KEYS)}
    script_c = np.array([o[1] for o in out]).reshape(shape)
    conc = np.array([o[2] for o in out]).reshape(shape)
    bf = np.array([o[3] for o in out]).reshape(shape)
    return SweepResult(s.name, pis, ks, pops, script_c, conc,
                       bf if s.params.kind.is_open else None)


# --------------------------------------------------------------------------
# P_s1 maximization

@dataclass(frozen=True)
class MaximizeResult:
    split: PopulationSplit
    pump: float
    leak: float
    concurrence: float
    script_c: float
    evaluations: int
    at_bound: bool = False
    converged: bool = True

    @property
    def p_s1(self) -> float:
        return self.split.p_s1


def _ps1_objective(gamma: float, multipliers: Mapping[int, float], n_max: int):
    if not multipliers and n_max == 2:
        def split_at(pump, leak):
            return PopulationSplit(*closed_form_populations(gamma, leak, pump))
    else:
        ladder = build_ladder(n_max)

        def split_at(pump, leak):
            params = ModelParams(gamma=gamma, leak=leak, pump=pump, n_max=n_max,
                                 leak_multiplier=multipliers)
            m = build_rate_matrix(ladder, params)
            p0 = PopulationVector.from_dict(m.labels, {"g": 1.0})
            return split_populations(steady_state(m, p0))
    return split_at


def maximize_ps1(gamma: float = 1.0, *, seed: int = 0, n_starts: int = 6,
                 bounds: tuple[float, float] = (1e-3, 1e4), max_iter: int = 4000,
                 coarse: int = 21, leak_multiplier: Mapping[int, float] | None = None,
                 n_max: int = 2) -> MaximizeResult:
    """Maximize steady-state P_s1 over (Pi, K), both in units of Gamma.

    Coarse log-spaced grid, then seeded Nelder-Mead restarts in log10 space
    within ``bounds``. For the plain n_max = 2 ladder the analytic steady state
    is used. The supremum there is only approached as K/Gamma grows, so the
    optimum normally sits on the upper bound (``at_bound``).
    """
    multipliers = dict(leak_multiplier or {})
    split_at = _ps1_objective(gamma, multipliers, n_max)
    lo, hi = np.log10(bounds[0]), np.log10(bounds[1])
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        x = np.clip(x, lo, hi)
        return -split_at(gamma * 10 ** x[0], gamma * 10 ** x[1]).p_s1

    axis = np.linspace(lo, hi, coarse)
    scored = sorted((f(np.array([a, b])), a, b) for b in axis for a in axis)
    rng = np.random.default_rng(seed)
    starts = [np.array([a, b]) for _, a, b in scored[: max(1, n_starts // 2)]]
    starts += list(rng.uniform(lo, hi, size=(n_starts - len(starts), 2)))
    best = None
    for x0 in starts:
        res = minimize(f, x0, method="Nelder-Mead", bounds=[(lo, hi), (lo, hi)],
                       options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-15})
        if best is None or res.fun < best.fun:
            best = res
    x = np.clip(best.x, lo, hi)
    pump, leak = gamma * 10 ** x[0], gamma * 10 ** x[1]
    split = split_at(pump, leak)
    result = MaximizeResult(
        split=split, pump=pump / gamma, leak=leak / gamma,
        concurrence=max(closed_form_argument(split), 0.0),
        script_c=closed_form_argument(split), evaluations=evals,
        at_bound=bool(np.any(np.isclose(x, lo) | np.isclose(x, hi))),
        converged=bool(best.success))
    if not best.success:
        raise OptimizerBudgetError(f"Nelder-Mead stopped without converging: {best.message}", result)
    log.debug("maximize_ps1: P_s1=%.6f at Pi=%.4g K=%.4g (%d evaluations)",
              split.p_s1, result.pump, result.leak, evals)
    return result


# --------------------------------------------------------------------------
# nonlinear leakage and free space

@dataclass(frozen=True)
class LeakSearchResult:
    factor: float
    pump: float
    leak: float
    concurrence: float
    sweep: SweepResult = field(repr=False)


def nonlinear_leak_search(factor: float, pi_range: tuple[float, float] = (0.05, 5.0),
                          k_range: tuple[float, float] = (0.05, 5.0), resolution: int = 50,
                          gamma: float = 1.0, workers: int = 1) -> LeakSearchResult:
    """Largest steady-state concurrence on the (Pi, K) grid when leakage out of
    n = 2 is ``factor`` times stronger than out of n = 1."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    s = make_scenario("nonlinear_leak", gamma=gamma, factor=factor)
    res = sweep(s, pi_range, k_range, resolution, workers=workers)
    i, j = np.unravel_index(int(np.argmax(res.concurrence)), res.concurrence.shape)
    return LeakSearchResult(factor, float(res.pi[j]), float(res.k[i]),
                            float(res.concurrence[i, j]), res)


def free_space_reference(gamma21: float, gamma23: float) -> np.ndarray:
    """Branching-ratio mixture reached by |12;0> decaying without a cavity:
    |11><11| and |13><13| weighted by gamma21 and gamma23."""
    if not (gamma21 > 0 and gamma23 > 0):
        raise ValueError("decay rates must be positive")
    total = gamma21 + gamma23
    rho = np.zeros((9, 9), dtype=complex)
    rho[basis_index(1, 1, True), basis_index(1, 1, True)] = gamma21 / total
    rho[basis_index(1, 3, True), basis_index(1, 3, True)] = gamma23 / total
    return rho
