"""Assembly of the augmented generator and its perturbation error system.

State ordering is ``x = (v, eta_hat, e)`` with ``v`` of size m (internal
model copy of the exosystem), ``eta_hat`` of size n, and scalar ``e``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import GainSet, _frozen


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Strictly proper continuous-time system ``x' = Ax + Bu``, ``y = Cx``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _frozen(self.A, 2)
        B = np.array(self.B, dtype=float)
        if B.ndim == 0:
            B = B.reshape(1, 1)
        elif B.ndim == 1:
            B = B.reshape(-1, 1)
        C = np.array(self.C, dtype=float)
        if C.ndim == 0:
            C = C.reshape(1, 1)
        elif C.ndim == 1:
            C = C.reshape(1, -1)
        B.setflags(write=False)
        C.setflags(write=False)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
        if C.shape[1] != A.shape[0]:
            raise ValueError(f"C has {C.shape[1]} columns, A is {A.shape[0]}x{A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def nstates(self) -> int:
        return self.A.shape[0]

    def scaled_output(self, c: float) -> "StateSpace":
        return StateSpace(self.A, self.B, c * self.C)


def build_A_S(S, A) -> np.ndarray:
    """Block-diagonal ``diag(S, A)``."""
    S = np.asarray(S, dtype=float)
    A = np.asarray(A, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("S and A must be square")
    return scipy.linalg.block_diag(S, A)


@dataclass(frozen=True, eq=False)
class AugmentedGenerator:
    """Closed-loop matrices of the generator ``x' = A_cl x + sum_k N_cl[k] xi_k``.

    ``A_cl = [[S, 0, L11], [0, A, L12], [L21, L22, L3]]``, ``eta_hat = C_cl^T x``
    and ``A_cl = A_S_prime + B1 L23^T``.
    """

    A_cl: np.ndarray
    N_cl_list: tuple
    C_cl: np.ndarray
    B1: np.ndarray
    A_S_prime: np.ndarray
    m: int
    n: int
    gains: GainSet

    @property
    def l(self) -> int:
        return len(self.N_cl_list)

    @property
    def nstates(self) -> int:
        return self.m + self.n + 1

    @property
    def v_slice(self) -> slice:
        return slice(0, self.m)

    @property
    def eta_slice(self) -> slice:
        return slice(self.m, self.m + self.n)

    @property
    def e_index(self) -> int:
        return self.m + self.n

    @property
    def N_cl_matrix(self) -> np.ndarray:
        """Input vectors stacked as columns, shape (m+n+1, l)."""
        return np.column_stack(self.N_cl_list)

    def A_cl_at(self, A_t) -> np.ndarray:
        """``A_cl`` with the plant block replaced by ``A_t``.

        ``A_t`` may be a stack of shape (..., n, n); the result then has shape
        (..., m+n+1, m+n+1). Only the plant block is overwritten.
        """
        A_t = np.asarray(A_t, dtype=float)
        out = np.broadcast_to(self.A_cl, A_t.shape[:-2] + self.A_cl.shape).copy()
        out[..., self.eta_slice, self.eta_slice] = A_t
        return out

    def channel(self, k: int) -> "AugmentedGenerator":
        """The same generator restricted to input channel ``k``."""
        return AugmentedGenerator(self.A_cl, (self.N_cl_list[k],), self.C_cl, self.B1,
                                  self.A_S_prime, self.m, self.n, self.gains)


def build_augmented(exo_S, A, gains: GainSet, N_list) -> AugmentedGenerator:
    S = np.asarray(exo_S, dtype=float)
    A = np.asarray(A, dtype=float)
    m, n = S.shape[0], A.shape[0]
    if S.shape != (m, m) or A.shape != (n, n):
        raise ValueError("S and A must be square")
    if gains.m != m or gains.n != n or gains.L21.size != m or gains.L22.size != n:
        raise ValueError(f"gains sized for (m, n) = ({gains.m}, {gains.n}), scenario has ({m}, {n})")
    N_list = [np.asarray(N, dtype=float).ravel() for N in N_list]
    if not N_list or any(N.size != n for N in N_list):
        raise ValueError(f"every input vector must have length {n}")

    d = m + n + 1
    A_S_prime = np.zeros((d, d))
    A_S_prime[:m + n, :m + n] = build_A_S(S, A)
    A_S_prime[:m + n, -1] = gains.L1
    B1 = np.zeros(d)
    B1[-1] = 1.0
    A_cl = A_S_prime + np.outer(B1, gains.L23)

    N_cl_list = []
    for N in N_list:
        N_cl = np.zeros(d)
        N_cl[m:m + n] = N
        N_cl_list.append(_frozen(N_cl, 1))
    C_cl = np.zeros((d, n))
    C_cl[m:m + n, :] = np.eye(n)
    return AugmentedGenerator(_frozen(A_cl, 2), tuple(N_cl_list), _frozen(C_cl, 2),
                              _frozen(B1, 1), _frozen(A_S_prime, 2), m, n, gains)


def extract_gains(A_cl, m: int, n: int) -> GainSet:
    A_cl = np.asarray(A_cl, dtype=float)
    return GainSet(A_cl[:m, -1], A_cl[m:m + n, -1], A_cl[-1, :m], A_cl[-1, m:m + n], A_cl[-1, -1])


def build_error_system(gen: AugmentedGenerator, channel: int = 0) -> StateSpace:
    """Transfer path from a perturbation on channel ``channel`` to ``eta_hat``."""
    return StateSpace(gen.A_cl, gen.N_cl_list[channel].reshape(-1, 1), gen.C_cl.T)


def error_systems(gen: AugmentedGenerator) -> list:
    return [build_error_system(gen, k) for k in range(gen.l)]
