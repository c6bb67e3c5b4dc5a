"""Exact bounded solution via the Sylvester equation, used to certify simulations.

For forcing generated by ``w' = S w``, ``xi = E^T w``, the bounded solution of
``eta' = A eta + N xi`` is ``eta = Pi w`` with ``Pi S = A Pi + N E^T``.

The equation is solved densely through its Kronecker form
``(S^T (x) I_n - I_m (x) A) vec(Pi) = vec(N E^T)``, an nm x nm system, so cost
grows as O(n^3 m^3); intended for desk-scale problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .ctrb import common_eigenvalue
from .errors import CommonEigenvalue, InsufficientWindow, NumericalFailure
from .model import Exosystem
from .sim import SimTrace, exosystem_propagate


@dataclass(frozen=True)
class SylvesterSolution:
    Pi: np.ndarray
    residual: float
    condition_estimate: float


def sylvester_operator(S, A) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    A = np.asarray(A, dtype=float)
    m, n = S.shape[0], A.shape[0]
    return np.kron(S.T, np.eye(n)) - np.kron(np.eye(m), A)


def solve_sylvester(S, A, N, E) -> SylvesterSolution:
    """Solve ``Pi S = A Pi + N E^T`` for ``Pi`` (n x m).

    Raises
    ------
    CommonEigenvalue
        S and A share an eigenvalue, so the solution is not unique.
    """
    S = np.asarray(S, dtype=float)
    A = np.asarray(A, dtype=float)
    N = np.asarray(N, dtype=float).ravel()
    E = np.asarray(E, dtype=float).ravel()
    m, n = S.shape[0], A.shape[0]
    if common_eigenvalue(S, A):
        raise CommonEigenvalue("S and A share an eigenvalue; the Sylvester equation is singular")
    K = sylvester_operator(S, A)
    rhs = np.outer(N, E)
    sv = np.linalg.svd(K, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    Pi = np.linalg.solve(K, rhs.reshape(-1, order="F")).reshape((n, m), order="F")
    res = float(np.linalg.norm(Pi @ S - A @ Pi - rhs))
    if not res < 1e-8 * (1 + np.linalg.norm(Pi)):
        raise NumericalFailure(f"Sylvester residual {res:.3e} too large (condition {cond:.3e})")
    return SylvesterSolution(Pi, res, cond)


def exact_iid(sol: SylvesterSolution, exo: Exosystem, t):
    """``Pi w(t)``; vectorized over ``t``."""
    return exosystem_propagate(exo, t) @ sol.Pi.T


def certify_trace(trace: SimTrace,
                  sol: Union[SylvesterSolution, Sequence[SylvesterSolution]],
                  exo: Union[Exosystem, Sequence[Exosystem]],
                  settle_fraction: float = 0.5) -> float:
    """sup over ``t >= settle_fraction * horizon`` of ``|eta_hat(t) - sum_k Pi_k w_k(t)|``.

    Accepts one solution/exosystem or matching lists (one per channel).
    """
    sols = [sol] if isinstance(sol, SylvesterSolution) else list(sol)
    exos = [exo] if isinstance(exo, Exosystem) else list(exo)
    if len(sols) != len(exos):
        raise ValueError("need one Sylvester solution per exosystem")
    if trace.horizon <= 0:
        raise InsufficientWindow("trace has zero horizon")
    mask = trace.times >= settle_fraction * trace.horizon
    if mask.sum() < 2:
        raise InsufficientWindow("fewer than two samples after the settling time")
    t = trace.times[mask]
    target = sum(exact_iid(s, e, t) for s, e in zip(sols, exos))
    return float(np.linalg.norm(trace.eta_hat[mask] - target, axis=1).max())
