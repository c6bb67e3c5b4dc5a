"""Gain selection for the generator.

``L1`` is fixed beforehand by the eigenvector construction of
:func:`iidgen.ctrb.construct_input_vector`. ``L23`` is found by a
derivative-free search over its m+n+1 entries: pole-placement seeds inside the
region, then Nelder-Mead on ``alpha*hinf + beta*h2`` plus penalties for
violated constraints. The returned point is certified afterwards at full
tolerance; it is a feasible point, not an optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize
import scipy.signal

from .analysis import NormReport, closed_loop_report, h2_norm, hinf_bracket
from .ctrb import (construct_input_vector, cyclicity_check, eigenvalues, extended_pair,
                   pbh_controllable)
from .errors import BudgetExhausted, NotCyclic, NumericalFailure, Uncontrollable
from .generator import StateSpace, build_A_S, build_augmented
from .model import GainSet, LmiRegion

SEARCH_HINF_TOL = 1e-4
PENALTY = 1e3
UNSTABLE = 1e8
# constraints are enforced slightly inside gamma0 / nu0 during the search
CONSTRAINT_SLACK = 1e-3
N_DETERMINISTIC_SEEDS = 4
N_RANDOM_SEEDS = 4
N_STARTS = 2


@dataclass(frozen=True)
class SynthesisSpec:
    """Constraints and weights of the gain search.

    ``gamma0`` and ``nu0`` may be ``inf`` and ``region`` may be ``None`` to ask
    for stability alone. ``budget`` counts objective evaluations.
    """

    gamma0: float = 20.0
    nu0: float = 20.0
    alpha: float = 0.5
    beta: float = 0.5
    region: Optional[LmiRegion] = field(default_factory=LmiRegion.example_region)
    budget: int = 1500
    seed: int = 0
    stability_margin: float = 0.05

    def __post_init__(self):
        if not (self.gamma0 > 0 and self.nu0 > 0):
            raise ValueError("gamma0 and nu0 must be positive")
        if not (self.alpha >= 0 and self.beta >= 0 and self.alpha + self.beta > 0):
            raise ValueError("alpha, beta must be >= 0 with alpha + beta > 0")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")
        if int(self.budget) != self.budget or self.budget < 1:
            raise ValueError("budget must be a positive integer")
        if not self.stability_margin > 0:
            raise ValueError("stability_margin must be positive")
        if self.region is not None and self.region.problems():
            raise ValueError("; ".join(self.region.problems()))


@dataclass(frozen=True)
class SynthesisResult:
    gains: GainSet
    achieved: NormReport
    objective: float
    feasible: bool
    iterations: int


def choose_L1(A_S) -> np.ndarray:
    """An ``L1`` making ``(A_S, L1)`` controllable, scaled to max |entry| = 1.

    Raises
    ------
    NotCyclic
        ``A_S`` has a repeated eigenvalue with geometric multiplicity > 1,
        e.g. ``S`` and ``A`` share an eigenvalue.
    """
    A_S = np.asarray(A_S, dtype=float)
    if not cyclicity_check(A_S):
        raise NotCyclic("A_S is not cyclic; S and A may share an eigenvalue")
    L1 = construct_input_vector(A_S)
    L1 = L1 / np.abs(L1).max()
    if not pbh_controllable(A_S, L1):
        raise NumericalFailure("normalized L1 lost controllability")
    return L1


def _seed_interval(region: Optional[LmiRegion], margin: float):
    """Real interval ``[lo, hi]`` (negative) whose points sit well inside the region."""
    if region is None:
        return -6.0, -1.0
    xs = -np.linspace(1e-3, 100.0, 100000)
    inside = xs[region.margin(xs) > 2 * margin]
    if inside.size == 0:
        inside = xs[region.margin(xs) > 0]
    if inside.size == 0:
        return -6.0, -1.0
    lo, hi = float(inside.min()), float(inside.max())
    # keep seeds within a decade of the slow edge; very fast poles buy nothing
    return max(lo, 10 * hi), hi


def pole_seeds(d: int, region: Optional[LmiRegion], margin: float, seed: int) -> list:
    """Deterministic then random sets of ``d`` distinct real poles inside the region."""
    lo, hi = _seed_interval(region, margin)
    span = hi - lo
    fractions = [(0.1, 0.55), (0.05, 0.9), (0.2, 0.35), (0.02, 0.25)][:N_DETERMINISTIC_SEEDS]
    seeds = [hi - span * np.linspace(a, b, d) for a, b in fractions]
    rng = np.random.default_rng(seed)
    for _ in range(N_RANDOM_SEEDS):
        p = np.sort(rng.uniform(hi - 0.95 * span, hi - 0.02 * span, d))
        # place_poles needs distinct poles for a single input
        p = p - 1e-3 * np.arange(d) * span
        seeds.append(p)
    return seeds


def _place(A_ext, B1, poles):
    res = scipy.signal.place_poles(A_ext, B1.reshape(-1, 1), poles)
    return -res.gain_matrix[0]


class _Objective:
    """Penalized trade-off; counts evaluations and remembers the best point seen."""

    def __init__(self, A_ext, B1, N_list, C, spec: SynthesisSpec):
        self.A_ext, self.B1, self.N_list, self.C, self.spec = A_ext, B1, N_list, C, spec
        self.calls = 0
        self.best = (math.inf, None)

    def __call__(self, L23):
        self.calls += 1
        value = self.value(np.asarray(L23, dtype=float))
        if value < self.best[0]:
            self.best = (value, np.array(L23, dtype=float))
        return value

    def value(self, L23):
        spec = self.spec
        A_cl = self.A_ext + np.outer(self.B1, L23)
        if not np.all(np.isfinite(A_cl)):
            return math.inf
        try:
            poles = eigenvalues(A_cl)
        except NumericalFailure:
            return math.inf
        abscissa = poles.real.max()
        if abscissa >= -1e-9:
            return UNSTABLE * (1.0 + abscissa)
        if spec.region is None:
            violation = max(0.0, abscissa + spec.stability_margin)
        else:
            violation = float(np.maximum(0.0, spec.stability_margin - spec.region.margin(poles)).sum())
        try:
            hinf = h2 = 0.0
            for N in self.N_list:
                sys = StateSpace(A_cl, N, self.C)
                hinf = max(hinf, hinf_bracket(sys, SEARCH_HINF_TOL).upper)
                h2 = max(h2, h2_norm(sys))
        except NumericalFailure:
            return UNSTABLE
        if math.isfinite(spec.gamma0):
            violation += max(0.0, hinf - spec.gamma0 * (1 - CONSTRAINT_SLACK)) / spec.gamma0
        if math.isfinite(spec.nu0):
            violation += max(0.0, h2 - spec.nu0 * (1 - CONSTRAINT_SLACK)) / spec.nu0
        trade = spec.alpha * hinf + spec.beta * h2
        return trade + PENALTY * (1.0 + trade) * violation


def synthesize_L23(A_S, L1, N_cl, C_cl, spec: SynthesisSpec, strict: bool = False) -> SynthesisResult:
    """Search ``L23`` for the generator with fixed ``L1``.

    Parameters
    ----------
    A_S : (m+n, m+n) array
        ``diag(S, A)``.
    L1 : (m+n,) array
    N_cl : array or list of arrays
        Augmented input vector(s); norms are the worst case over channels.
    C_cl : (m+n+1, n) array
        ``eta_hat = C_cl^T x``.
    spec : SynthesisSpec
    strict : bool
        Raise :class:`BudgetExhausted` instead of returning an infeasible result.
    """
    A_S = np.asarray(A_S, dtype=float)
    L1 = np.asarray(L1, dtype=float).ravel()
    C_cl = np.asarray(C_cl, dtype=float)
    N_arr = np.asarray(N_cl, dtype=float)
    N_list = [N_arr.ravel()] if N_arr.ndim == 1 else [np.asarray(N, float).ravel() for N in N_cl]
    d = A_S.shape[0] + 1
    n = C_cl.shape[1]
    m = d - 1 - n
    if L1.size != d - 1 or C_cl.shape[0] != d or any(N.size != d for N in N_list):
        raise ValueError("A_S, L1, N_cl and C_cl sizes disagree")
    if not pbh_controllable(A_S, L1):
        raise Uncontrollable("(A_S, L1) is not controllable")

    A_ext, B1 = extended_pair(A_S, L1)
    C = C_cl.T
    obj = _Objective(A_ext, B1, N_list, C, spec)

    # seeds, scored in order; failures to place are skipped
    starts = []
    for i, poles in enumerate(pole_seeds(d, spec.region, spec.stability_margin, spec.seed)):
        if obj.calls >= spec.budget:
            break
        try:
            L23 = _place(A_ext, B1, poles)
        except (ValueError, np.linalg.LinAlgError):
            continue
        starts.append((obj(L23), i, L23))
    if not starts:
        raise NumericalFailure("pole placement failed for every seed")
    starts.sort(key=lambda s: (s[0], s[1]))

    chosen = starts[:N_STARTS]
    for j, (_, _, L23_0) in enumerate(chosen):
        remaining = spec.budget - obj.calls
        share = remaining // (len(chosen) - j)
        if share < d + 2:
            break
        scale = np.maximum(np.abs(L23_0), 1.0)
        simplex = np.vstack([np.zeros(d), 0.1 * np.eye(d)])
        scipy.optimize.minimize(lambda z: obj(L23_0 + z * scale), np.zeros(d), method="Nelder-Mead",
                                options=dict(maxfev=share, initial_simplex=simplex,
                                             xatol=1e-8, fatol=1e-10))

    value, L23 = obj.best
    gains = GainSet.from_stacked(L1, L23, m)
    A_cl = A_ext + np.outer(B1, L23)
    report = closed_loop_report(A_cl, N_list, C_cl, spec.region)
    feasible = bool(report.stable and report.region_ok
                    and report.hinf < spec.gamma0 and report.h2 < spec.nu0)
    result = SynthesisResult(gains, report, float(spec.alpha * report.hinf + spec.beta * report.h2),
                             feasible, obj.calls)
    if strict and not feasible:
        raise BudgetExhausted(f"no feasible gains after {obj.calls} evaluations", result)
    return result


def synthesize(scenario, spec: Optional[SynthesisSpec] = None, L1=None,
               strict: bool = False) -> SynthesisResult:
    """Synthesize gains for a scenario (frozen ``A`` for a time-varying plant).

    ``L1`` defaults to the scenario's configured ``L1`` if gains are present,
    otherwise to :func:`choose_L1`.
    """
    spec = spec or scenario.synthesis or SynthesisSpec(region=scenario.region)
    S = scenario.exosystems[0].S
    A = scenario.plant.frozen_A
    A_S = build_A_S(S, A)
    if L1 is None:
        L1 = scenario.gains.L1 if scenario.gains is not None else choose_L1(A_S)
    m, n = S.shape[0], A.shape[0]
    gen = build_augmented(S, A, GainSet.from_stacked(L1, np.zeros(m + n + 1), m), scenario.plant.N_list)
    return synthesize_L23(A_S, L1, list(gen.N_cl_list), gen.C_cl, spec, strict)


def verify_gains(scenario, gains: GainSet, spec: Optional[SynthesisSpec] = None) -> NormReport:
    """Certified norms, stability and region membership of ``gains`` on the scenario.

    The region comes from ``spec`` when given, else from the scenario.
    """
    region = spec.region if spec is not None else scenario.region
    gen = build_augmented(scenario.exosystems[0].S, scenario.plant.frozen_A, gains,
                          scenario.plant.N_list)
    return closed_loop_report(gen.A_cl, gen.N_cl_list, gen.C_cl, region)
