"""Spectral and single-input controllability tools.

Rank decisions are singular-value thresholds relative to the largest
singular value of the matrix under test (default ``1e-9``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DefectiveUnsupported, NotCyclic, NumericalFailure, Uncontrollable

RANK_TOL = 1e-9
# Cyclic matrices with eigenvalues this close are treated as carrying a Jordan chain.
DEFECT_GAP = 1e-6


def eigenvalues(F) -> np.ndarray:
    """Eigenvalues of a real square matrix, conjugate pairs exactly paired.

    Sorted by (Re, Im).
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {F.shape}")
    try:
        lam = np.linalg.eigvals(F)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration failed: {exc}") from exc
    if not np.all(np.isfinite(lam)):
        raise NumericalFailure("non-finite eigenvalues")
    lam = np.asarray(lam, dtype=complex)
    # LAPACK returns exact conjugate pairs for real input; rebuild them to be safe.
    upper = lam[lam.imag > 0]
    real = lam[lam.imag == 0].real
    paired = np.concatenate([real.astype(complex), upper, np.conj(upper)])
    if paired.size != lam.size:
        paired = lam
    order = np.lexsort((paired.imag, paired.real))
    return paired[order]


def _rank(M, tol=RANK_TOL) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def pbh_controllable(F, B, tol=RANK_TOL) -> bool:
    """PBH test: ``rank [F - lam I, B] = n`` at every eigenvalue ``lam`` of F."""
    F = np.asarray(F, dtype=float)
    B = np.asarray(B, dtype=float).reshape(F.shape[0], -1)
    n = F.shape[0]
    eye = np.eye(n)
    for lam in eigenvalues(F):
        if lam.imag < 0:
            continue  # conjugate gives the conjugate rank test
        if _rank(np.hstack([F - lam * eye, B]), tol) < n:
            return False
    return True


def cyclicity_check(F, tol=RANK_TOL) -> bool:
    """True iff every eigenvalue has geometric multiplicity one."""
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    scale = np.linalg.norm(F, 2) or 1.0
    eye = np.eye(n)
    for lam in eigenvalues(F):
        s = np.linalg.svd(F - lam * eye, compute_uv=False)
        if np.sum(s > tol * scale) != n - 1:
            return False
    return True


def common_eigenvalue(S, A, tol=RANK_TOL) -> bool:
    """True iff S and A (numerically) share an eigenvalue."""
    ls, la = eigenvalues(S), eigenvalues(A)
    radius = max(np.abs(ls).max(), np.abs(la).max())
    gap = np.abs(ls[:, None] - la[None, :]).min()
    return bool(gap < tol * (1 + radius))


@dataclass(frozen=True)
class SpectralData:
    """Real block-diagonal form ``T^{-1} F T = J``.

    ``J`` carries 1x1 blocks for real eigenvalues and ``[[a, b], [-b, a]]``
    blocks for each pair ``a +- jb`` (``b > 0``), in the order of ``blocks``.
    """

    eigenvalues: np.ndarray
    right_basis: np.ndarray
    transform_T: np.ndarray
    J: np.ndarray
    blocks: tuple  # (start index, size) per real block
    condition: float


def real_block_diagonalize(F, tol=RANK_TOL) -> SpectralData:
    """Real block diagonalization of a semisimple matrix with distinct eigenvalues."""
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    lam, V = np.linalg.eig(F)
    radius = max(np.abs(lam).max(), 1.0)
    gaps = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(gaps, np.inf)
    if n > 1 and gaps.min() < DEFECT_GAP * radius:
        raise DefectiveUnsupported(
            "repeated eigenvalue in a cyclic matrix implies a Jordan chain of length > 1")
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e12:
        raise DefectiveUnsupported(f"eigenvector basis is numerically singular (cond {cond:.2e})")

    # deterministic ordering: reals first, then pairs by Im > 0 representative
    order = np.lexsort((lam.imag, lam.real))
    T_cols, blocks, kept = [], [], []
    for idx in order:
        lk, vk = lam[idx], V[:, idx]
        if lk.imag < 0:
            continue
        start = len(T_cols)
        if lk.imag == 0:
            # real eigenvalue: eigenvector is real up to a global phase
            vk = vk * np.exp(-1j * np.angle(vk[np.argmax(np.abs(vk))]))
            T_cols.append(vk.real)
            blocks.append((start, 1))
            kept.append(lk)
        else:
            T_cols.extend([vk.real, vk.imag])
            blocks.append((start, 2))
            kept.extend([lk, np.conj(lk)])
    T = np.column_stack(T_cols)
    if T.shape != (n, n):
        raise NumericalFailure("eigenvalues did not come in conjugate pairs")
    J = np.linalg.solve(T, F @ T)
    return SpectralData(np.array(kept), V, T, J, tuple(blocks), float(np.linalg.cond(T)))


def construct_input_vector(F, tol=RANK_TOL) -> np.ndarray:
    """Real vector B making (F, B) controllable, built from left eigenvectors.

    Block-diagonalize ``F`` to real form ``J``, add one left eigenvector per
    real block and a conjugate pair per 2x2 block (the pair sums to a real
    vector), and map back through ``T``.

    Raises
    ------
    NotCyclic
        Some eigenvalue has geometric multiplicity > 1.
    DefectiveUnsupported
        Cyclic but with a Jordan chain; numerical Jordan forms are not attempted.
    """
    F = np.asarray(F, dtype=float)
    if not cyclicity_check(F, tol):
        raise NotCyclic("an eigenvalue has geometric multiplicity > 1; no single input can control F")
    spec = real_block_diagonalize(F, tol)
    n = F.shape[0]
    z = np.zeros(n)
    for start, size in spec.blocks:
        # 1x1 block: left eigenvector e_start. 2x2 block [[a, b], [-b, a]]:
        # left eigenvectors (1/2)[1, +-j], whose sum is [1, 0].
        z[start] = 1.0
    B = spec.transform_T @ z
    if not pbh_controllable(F, B, tol):
        raise NumericalFailure("constructed input vector failed the PBH post-check")
    return B


def faddeev_leverrier(F):
    """Characteristic polynomial coefficients and adjugate coefficient matrices.

    Returns ``(c, Ms)`` with ``det(sI - F) = sum_k c[k] s^(n-k)`` (``c[0] = 1``)
    and ``adj(sI - F) = sum_{k=1}^{n} Ms[k-1] s^(n-k)``.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    c = np.zeros(n + 1)
    c[0] = 1.0
    Ms = []
    M = np.zeros_like(F)
    for k in range(1, n + 1):
        M = F @ M + c[k - 1] * np.eye(n)
        Ms.append(M)
        c[k] = -np.trace(F @ M) / k
    return c, Ms


def left_functional_vector(F, B, tol=RANK_TOL) -> np.ndarray:
    """Vector C with ``C^T (sI - F)^{-1} B = 1 / det(sI - F)``.

    ``(sI - F)^{-1} B = G [s^{n-1}, ..., 1]^T / det(sI - F)`` where the
    columns of G are ``M_k B`` from the Faddeev-LeVerrier recursion;
    then ``C = G^{-T} e_n``.
    """
    F = np.asarray(F, dtype=float)
    B = np.asarray(B, dtype=float).ravel()
    _, Ms = faddeev_leverrier(F)
    G = np.column_stack([M @ B for M in Ms])
    s = np.linalg.svd(G, compute_uv=False)
    if s[0] == 0 or s[-1] < tol * s[0]:
        raise Uncontrollable("coefficient matrix of adj(sI - F) B is rank deficient")
    e_n = np.zeros(F.shape[0])
    e_n[-1] = 1.0
    return np.linalg.solve(G.T, e_n)


def controllability_matrix(F, B) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    cols = [np.asarray(B, dtype=float).ravel()]
    for _ in range(F.shape[0] - 1):
        cols.append(F @ cols[-1])
    return np.column_stack(cols)


def extended_pair(A_S, L1):
    """The pair ``([[A_S, L1], [0, 0]], [0; 1])`` through which L23 acts."""
    A_S = np.asarray(A_S, dtype=float)
    k = A_S.shape[0]
    F = np.zeros((k + 1, k + 1))
    F[:k, :k] = A_S
    F[:k, k] = np.asarray(L1, dtype=float).ravel()
    B = np.zeros(k + 1)
    B[k] = 1.0
    return F, B
