"""System norms, Lyapunov solves and pole-region checks.

H2 goes through the controllability Gramian. The H-infinity norm is bracketed
by bisection on the Hamiltonian imaginary-axis eigenvalue test. The
frequency-grid and quadrature routines are brute-force cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.linalg

from .ctrb import eigenvalues
from .errors import NotHurwitz, NumericalFailure
from .generator import AugmentedGenerator, StateSpace
from .model import LmiRegion

IMAG_AXIS_TOL = 1e-8
BOUNDARY_TOL = 1e-9


def is_hurwitz(A) -> bool:
    return bool(eigenvalues(A).real.max() < 0)


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve ``A P + P A^T + Q = 0`` for Hurwitz ``A``.

    Returns the symmetrized solution; raises :class:`NotHurwitz` otherwise.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if not is_hurwitz(A):
        raise NotHurwitz("Lyapunov equation needs a Hurwitz matrix")
    P = scipy.linalg.solve_continuous_lyapunov(A, -Q)
    P = 0.5 * (P + P.T)
    res = np.linalg.norm(A @ P + P @ A.T + Q)
    bound = 1e-8 * (np.linalg.norm(A) * np.linalg.norm(P) + np.linalg.norm(Q))
    if not res <= bound:
        raise NumericalFailure(f"Lyapunov residual {res:.3e} exceeds {bound:.3e}")
    return P


def h2_norm(sys: StateSpace) -> float:
    """``sqrt(trace(C P C^T))`` with P the controllability Gramian; ``inf`` if unstable."""
    if not is_hurwitz(sys.A):
        return math.inf
    P = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    return float(np.sqrt(max(np.trace(sys.C @ P @ sys.C.T), 0.0)))


def frequency_response(sys: StateSpace, omega) -> np.ndarray:
    """``C (j w I - A)^{-1} B`` for every ``w`` in ``omega``; shape (K, p, q)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    nx = sys.nstates
    M = 1j * omega[:, None, None] * np.eye(nx) - sys.A
    X = np.linalg.solve(M, np.broadcast_to(sys.B.astype(complex), (omega.size,) + sys.B.shape))
    return sys.C @ X


def sigma_max(sys: StateSpace, omega) -> np.ndarray:
    G = frequency_response(sys, omega)
    if G.shape[1] == 1 or G.shape[2] == 1:
        return np.linalg.norm(G.reshape(G.shape[0], -1), axis=1)
    return np.linalg.svd(G, compute_uv=False)[:, 0]


def _hamiltonian(sys: StateSpace, gamma: float) -> np.ndarray:
    A, B, C = sys.A, sys.B, sys.C
    return np.block([[A, (B @ B.T) / gamma**2], [-(C.T @ C), -A.T]])


def _imaginary_crossings(sys: StateSpace, gamma: float) -> np.ndarray:
    """Nonnegative frequencies ``w`` with ``jw`` an eigenvalue of the Hamiltonian."""
    lam = np.linalg.eigvals(_hamiltonian(sys, gamma))
    on_axis = np.abs(lam.real) <= IMAG_AXIS_TOL * np.maximum(1.0, np.abs(lam))
    return np.unique(np.abs(lam[on_axis].imag))


@dataclass(frozen=True)
class HinfBracket:
    lower: float
    upper: float
    peak_frequency: float


def hinf_bracket(sys: StateSpace, tol: float = 1e-6, max_iter: int = 200) -> HinfBracket:
    """Bisection bracket ``lower <= ||T||_inf <= upper`` with ``upper - lower <= tol * upper``.

    ``lower`` is always an attained value of the largest singular value of the
    frequency response, ``upper`` a level with no imaginary-axis eigenvalue
    of the Hamiltonian.
    """
    if not is_hurwitz(sys.A):
        raise NotHurwitz("H-infinity norm of an unstable system is unbounded")
    if not np.any(sys.B) or not np.any(sys.C):
        return HinfBracket(0.0, 0.0, 0.0)

    poles = eigenvalues(sys.A)
    cands = np.unique(np.concatenate([[0.0], np.abs(poles.imag), np.abs(poles)]))
    sig = sigma_max(sys, cands)
    best = int(np.argmax(sig))
    lower, peak = float(sig[best]), float(cands[best])

    def raise_lower(freqs):
        nonlocal lower, peak
        if freqs.size == 0:
            return
        # midpoints between consecutive crossings hold the local peaks
        probes = np.concatenate([freqs, 0.5 * (freqs[1:] + freqs[:-1]), [0.0]])
        s = sigma_max(sys, probes)
        k = int(np.argmax(s))
        if s[k] > lower:
            lower, peak = float(s[k]), float(probes[k])

    upper = 2.0 * max(lower, np.finfo(float).tiny)
    for _ in range(max_iter):
        crossings = _imaginary_crossings(sys, upper)
        if crossings.size == 0:
            break
        raise_lower(crossings)
        upper = 2.0 * max(upper, lower)
    else:
        raise NumericalFailure("could not find an upper bound for the H-infinity norm")

    for _ in range(max_iter):
        if upper - lower <= tol * upper:
            break
        mid = 0.5 * (lower + upper)
        crossings = _imaginary_crossings(sys, mid)
        if crossings.size:
            lower = max(lower, mid)
            raise_lower(crossings)
            if lower > upper:
                upper = lower
        else:
            upper = mid
    else:
        raise NumericalFailure("H-infinity bisection did not converge")
    return HinfBracket(lower, upper, peak)


def hinf_norm(sys: StateSpace, tol: float = 1e-6) -> float:
    """Upper end of the bisection bracket (a certified bound within ``tol``)."""
    return hinf_bracket(sys, tol).upper


def hinf_grid(sys: StateSpace, omega) -> tuple:
    """Brute-force peak of the largest singular value over a frequency grid."""
    s = sigma_max(sys, omega)
    k = int(np.argmax(s))
    return float(s[k]), float(np.atleast_1d(omega)[k])


def h2_quadrature(sys: StateSpace, w_max: float = 1e3, npts: int = 20001,
                  w_min: float = 1e-6) -> float:
    """``sqrt((1/pi) int_0^w_max ||T(jw)||_F^2 dw)`` by trapezoid on a log grid."""
    omega = np.logspace(np.log10(w_min), np.log10(w_max), npts)
    G = frequency_response(sys, omega)
    f = np.sum(np.abs(G) ** 2, axis=(1, 2))
    f0 = float(np.sum(np.abs(frequency_response(sys, [0.0])) ** 2))
    integral = scipy.integrate.trapezoid(f, omega) + f0 * w_min
    return float(np.sqrt(integral / np.pi))


def poles_in_region(A_cl, region: LmiRegion, tol: float = BOUNDARY_TOL) -> bool:
    """True iff every eigenvalue of ``A_cl`` lies in ``region`` (boundary within ``tol`` counts)."""
    return bool(np.all(region.contains(eigenvalues(A_cl), tol)))


@dataclass(frozen=True)
class NormReport:
    """Certified closed-loop figures; norms are the worst case over input channels."""

    h2: float
    hinf: float
    hinf_bracket: tuple
    poles: np.ndarray
    region_ok: bool
    stable: bool
    peak_frequency: float = math.nan
    channel_h2: tuple = ()
    channel_hinf: tuple = ()
    region: Optional[LmiRegion] = field(default=None, repr=False)

    def as_metrics(self) -> dict:
        return {
            "stable": self.stable,
            "h2": self.h2,
            "hinf": self.hinf,
            "hinf_lower": self.hinf_bracket[0],
            "hinf_upper": self.hinf_bracket[1],
            "peak_frequency": self.peak_frequency,
            "region_ok": self.region_ok,
            "poles": list(self.poles),
        }


def closed_loop_report(A_cl, N_cl_list, C_cl, region: Optional[LmiRegion] = None,
                       tol: float = 1e-6) -> NormReport:
    """Norms of ``(A_cl, N_cl[k], C_cl^T)`` for every channel ``k``, worst case reported."""
    A_cl = np.asarray(A_cl, dtype=float)
    N_cl_list = [np.asarray(N, dtype=float).reshape(-1, 1) for N in N_cl_list]
    C = np.asarray(C_cl, dtype=float).T
    l = len(N_cl_list)
    poles = eigenvalues(A_cl)
    stable = bool(poles.real.max() < 0)
    region_ok = stable and (region is None or bool(np.all(region.contains(poles, BOUNDARY_TOL))))
    if not stable:
        inf = math.inf
        return NormReport(inf, inf, (inf, inf), poles, False, False, math.nan,
                          (inf,) * l, (inf,) * l, region)
    h2s, brackets = [], []
    for N in N_cl_list:
        sys = StateSpace(A_cl, N, C)
        h2s.append(h2_norm(sys))
        brackets.append(hinf_bracket(sys, tol))
    worst = max(range(l), key=lambda k: brackets[k].upper)
    b = brackets[worst]
    return NormReport(max(h2s), b.upper, (b.lower, b.upper), poles, region_ok, True,
                      b.peak_frequency, tuple(h2s), tuple(x.upper for x in brackets), region)


def norm_report(gen: AugmentedGenerator, region: Optional[LmiRegion] = None,
                tol: float = 1e-6) -> NormReport:
    return closed_loop_report(gen.A_cl, gen.N_cl_list, gen.C_cl, region, tol)
