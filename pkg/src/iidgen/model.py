"""Domain types: exosystems, plants, generator gains and pole regions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

VALIDATION_TOL = 1e-12


def _frozen(a, ndim=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if ndim == 2 and arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif ndim == 1 and arr.ndim == 0:
        arr = arr.reshape(1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Exosystem:
    """Autonomous signal model ``w' = S w``, ``xi = E^T w``, ``w(0) = w0``."""

    S: np.ndarray
    E: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "S", _frozen(self.S, 2))
        object.__setattr__(self, "E", _frozen(self.E, 1))
        object.__setattr__(self, "w0", _frozen(self.w0, 1))

    @property
    def m(self) -> int:
        return self.S.shape[0]


# --- time-varying matrix entries -------------------------------------------
#
# A(t) is a matrix of expression nodes. Each node evaluates on an array of
# times and serializes to a plain config value, so scenario files stay
# declarative.


class Expr:
    def __call__(self, t):
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def __call__(self, t):
        return np.full(np.shape(t), self.value, dtype=float)

    def to_config(self):
        return float(self.value)


@dataclass(frozen=True)
class Sin(Expr):
    """``amplitude * sin(frequency * t + phase)``"""

    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float) + self.phase)

    def to_config(self):
        return {"sin": {"amplitude": float(self.amplitude), "frequency": float(self.frequency),
                        "phase": float(self.phase)}}


@dataclass(frozen=True)
class Scale(Expr):
    factor: float
    arg: Expr

    def __call__(self, t):
        return self.factor * self.arg(t)

    def to_config(self):
        return {"scale": {"factor": float(self.factor), "arg": self.arg.to_config()}}


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple

    def __call__(self, t):
        out = np.zeros(np.shape(t), dtype=float)
        for term in self.terms:
            out = out + term(t)
        return out

    def to_config(self):
        return {"sum": [term.to_config() for term in self.terms]}


def parse_expr(node, path="expr") -> Expr:
    from .errors import ConfigError

    if isinstance(node, bool):
        raise ConfigError("boolean is not a matrix entry", path)
    if isinstance(node, (int, float)):
        return Const(float(node))
    if not isinstance(node, dict) or len(node) != 1:
        raise ConfigError("expected a number or a single-key mapping (sin/scale/sum)", path)
    (kind, body), = node.items()
    if kind == "sin":
        if not isinstance(body, dict):
            raise ConfigError("sin expects a mapping", f"{path}.sin")
        unknown = set(body) - {"amplitude", "frequency", "phase"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", f"{path}.sin")
        return Sin(float(body.get("amplitude", 1.0)), float(body.get("frequency", 1.0)),
                   float(body.get("phase", 0.0)))
    if kind == "scale":
        if not isinstance(body, dict) or set(body) != {"factor", "arg"}:
            raise ConfigError("scale expects keys factor and arg", f"{path}.scale")
        return Scale(float(body["factor"]), parse_expr(body["arg"], f"{path}.scale.arg"))
    if kind == "sum":
        if not isinstance(body, list) or not body:
            raise ConfigError("sum expects a non-empty list", f"{path}.sum")
        return Sum(tuple(parse_expr(b, f"{path}.sum[{i}]") for i, b in enumerate(body)))
    raise ConfigError(f"unknown expression kind {kind!r}", path)


@dataclass(frozen=True, eq=False)
class MatrixExpr:
    """Square matrix whose entries are expression nodes of time."""

    entries: tuple  # tuple of row tuples of Expr

    @property
    def shape(self):
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    def __call__(self, t):
        """Evaluate at scalar ``t`` (returns n x n) or an array of times (returns K x n x n)."""
        t_arr = np.asarray(t, dtype=float)
        n_rows, n_cols = self.shape
        out = np.empty(t_arr.shape + (n_rows, n_cols))
        for i, row in enumerate(self.entries):
            for j, entry in enumerate(row):
                out[..., i, j] = entry(t_arr)
        return out

    def to_config(self):
        return [[e.to_config() for e in row] for row in self.entries]

    @classmethod
    def from_config(cls, rows, path="A_expr"):
        from .errors import ConfigError

        if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
            raise ConfigError("expected a nested list", path)
        return cls(tuple(tuple(parse_expr(e, f"{path}[{i}][{j}]") for j, e in enumerate(row))
                         for i, row in enumerate(rows)))


@dataclass(frozen=True, eq=False)
class Plant:
    """Unstable internal dynamics ``eta' = A eta + sum_k N_k xi_k``.

    ``A`` is either a constant matrix or a :class:`MatrixExpr`. Gains are
    always designed on ``frozen_A``; for constant plants it defaults to ``A``.
    """

    A: Union[np.ndarray, MatrixExpr]
    N_list: tuple
    frozen_A: Optional[np.ndarray] = None

    def __post_init__(self):
        if not isinstance(self.A, MatrixExpr):
            object.__setattr__(self, "A", _frozen(self.A, 2))
        object.__setattr__(self, "N_list", tuple(_frozen(N, 1) for N in self.N_list))
        if self.frozen_A is None:
            if isinstance(self.A, MatrixExpr):
                raise ValueError("time-varying plant needs an explicit frozen_A")
            object.__setattr__(self, "frozen_A", self.A)
        else:
            object.__setattr__(self, "frozen_A", _frozen(self.frozen_A, 2))

    @property
    def time_varying(self) -> bool:
        return isinstance(self.A, MatrixExpr)

    @property
    def n(self) -> int:
        return self.frozen_A.shape[0]

    @property
    def l(self) -> int:
        return len(self.N_list)

    def A_at(self, t):
        if self.time_varying:
            return self.A(t)
        t_arr = np.asarray(t, dtype=float)
        return np.broadcast_to(self.A, t_arr.shape + self.A.shape)


@dataclass(frozen=True, eq=False)
class GainSet:
    """Generator gains in the block layout of the augmented matrix.

    ``L11`` (m,), ``L12`` (n,), ``L21`` (m,), ``L22`` (n,), ``L3`` scalar.
    The stacked views are ``L1 = [L11; L12]`` and ``L23 = [L21, L22, L3]``.
    """

    L11: np.ndarray
    L12: np.ndarray
    L21: np.ndarray
    L22: np.ndarray
    L3: float

    def __post_init__(self):
        for name in ("L11", "L12", "L21", "L22"):
            object.__setattr__(self, name, _frozen(getattr(self, name), 1))
        object.__setattr__(self, "L3", float(self.L3))

    @classmethod
    def from_stacked(cls, L1, L23, m: int) -> "GainSet":
        L1 = np.asarray(L1, dtype=float).ravel()
        L23 = np.asarray(L23, dtype=float).ravel()
        n = L1.size - m
        if n < 1 or L23.size != m + n + 1:
            raise ValueError(f"stacked gains of length {L1.size}/{L23.size} do not fit m={m}")
        return cls(L1[:m], L1[m:], L23[:m], L23[m:m + n], L23[m + n])

    @property
    def m(self) -> int:
        return self.L11.size

    @property
    def n(self) -> int:
        return self.L12.size

    @property
    def L1(self) -> np.ndarray:
        return np.concatenate([self.L11, self.L12])

    @property
    def L23(self) -> np.ndarray:
        return np.concatenate([self.L21, self.L22, [self.L3]])

    def __eq__(self, other):
        if not isinstance(other, GainSet):
            return NotImplemented
        return (np.array_equal(self.L1, other.L1) and np.array_equal(self.L23, other.L23)
                and self.m == other.m)


# --- pole regions ------------------------------------------------------------


@dataclass(frozen=True)
class LmiRegion:
    """Convex region of the open left half-plane used as a pole constraint.

    Kinds and parameters:

    ``strip``         hmin <= Re z <= hmax
    ``conic_sector``  cone about the negative real axis, apex at 0,
                      total opening ``inner_angle``
    ``half_plane``    Re z <= bound
    ``intersection``  all of ``parts``

    Membership is decided geometrically through :meth:`margin`, the signed
    Euclidean slack to the nearest boundary (positive inside). The matrix
    pair from :meth:`qm` gives the same set as
    ``{z : Q + z M + conj(z) M^T < 0}``.
    """

    kind: str
    hmin: float = -math.inf
    hmax: float = 0.0
    inner_angle: float = math.pi
    bound: float = 0.0
    parts: tuple = ()

    @classmethod
    def strip(cls, hmin, hmax):
        return cls("strip", hmin=float(hmin), hmax=float(hmax))

    @classmethod
    def conic_sector(cls, inner_angle):
        return cls("conic_sector", inner_angle=float(inner_angle))

    @classmethod
    def half_plane(cls, bound):
        return cls("half_plane", bound=float(bound))

    @classmethod
    def intersection(cls, parts):
        return cls("intersection", parts=tuple(parts))

    @classmethod
    def example_region(cls):
        """Sector of opening 3*pi/4 intersected with the strip [-10, -1]."""
        return cls.intersection([cls.conic_sector(3 * math.pi / 4), cls.strip(-10.0, -1.0)])

    def problems(self) -> list:
        if self.kind == "strip":
            if not (self.hmin < self.hmax < 0):
                return [f"strip needs hmin < hmax < 0, got [{self.hmin}, {self.hmax}]"]
        elif self.kind == "conic_sector":
            if not (0 < self.inner_angle < math.pi):
                return [f"sector inner angle {self.inner_angle} outside (0, pi)"]
        elif self.kind == "half_plane":
            if not math.isfinite(self.bound):
                return ["half-plane bound must be finite"]
        elif self.kind == "intersection":
            if not self.parts:
                return ["empty intersection"]
            return [p for part in self.parts for p in part.problems()]
        else:
            return [f"unknown region kind {self.kind!r}"]
        return []

    def margin(self, z):
        """Signed distance of ``z`` to the region boundary (vectorized, positive inside)."""
        z = np.asarray(z, dtype=complex)
        re, im = z.real, np.abs(z.imag)
        if self.kind == "strip":
            return np.minimum(re - self.hmin, self.hmax - re)
        if self.kind == "half_plane":
            return self.bound - re
        if self.kind == "conic_sector":
            half = self.inner_angle / 2
            return -(re * math.sin(half) + im * math.cos(half))
        if self.kind == "intersection":
            return np.min([part.margin(z) for part in self.parts], axis=0)
        raise ValueError(f"unknown region kind {self.kind!r}")

    def contains(self, z, tol=1e-9):
        """Boundary points within ``tol`` count as inside."""
        return self.margin(z) >= -tol

    def qm(self):
        """Characteristic pair (Q, M) with region = {z : Q + zM + conj(z)M^T negative definite}."""
        if self.kind == "strip":
            return np.diag([2 * self.hmin, -2 * self.hmax]), np.diag([-1.0, 1.0])
        if self.kind == "half_plane":
            return np.array([[-2 * self.bound]]), np.array([[1.0]])
        if self.kind == "conic_sector":
            s, c = math.sin(self.inner_angle / 2), math.cos(self.inner_angle / 2)
            return np.zeros((2, 2)), np.array([[s, c], [-c, s]])
        if self.kind == "intersection":
            pairs = [part.qm() for part in self.parts]
            size = sum(Q.shape[0] for Q, _ in pairs)
            Q, M = np.zeros((size, size)), np.zeros((size, size))
            k = 0
            for Qi, Mi in pairs:
                r = Qi.shape[0]
                Q[k:k + r, k:k + r] = Qi
                M[k:k + r, k:k + r] = Mi
                k += r
            return Q, M
        raise ValueError(f"unknown region kind {self.kind!r}")

    def contains_qm(self, z) -> bool:
        Q, M = self.qm()
        F = Q + z * M + np.conj(z) * M.T
        return bool(np.linalg.eigvalsh(F).max() < 0)

    def to_config(self) -> dict:
        cfg = {}

        def visit(r):
            if r.kind == "intersection":
                for p in r.parts:
                    visit(p)
            elif r.kind == "strip":
                cfg["strip"] = [r.hmin, r.hmax]
            elif r.kind == "conic_sector":
                cfg["sector_inner_angle"] = r.inner_angle
            elif r.kind == "half_plane":
                cfg["half_plane"] = r.bound

        visit(self)
        return cfg


# --- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" or "warning"
    path: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.path}: {self.message}"


@dataclass
class ValidationReport:
    issues: list = field(default_factory=list)

    def add(self, severity, path, message):
        self.issues.append(Issue(severity, path, message))

    @property
    def errors(self):
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self):
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __len__(self):
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)


def _square(report, path, M) -> bool:
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        report.add("error", path, f"expected a non-empty square matrix, got shape {M.shape}")
        return False
    return True


def validate_scenario(exo_list: Sequence[Exosystem], plant: Plant,
                      gains: Optional[GainSet] = None) -> ValidationReport:
    """Collect dimension mismatches and warnings. Never raises."""
    report = ValidationReport()
    exo_list = list(exo_list)
    if not exo_list:
        report.add("error", "exosystems", "at least one exosystem is required")

    m = None
    S_ref = None
    for k, exo in enumerate(exo_list):
        p = f"exosystems[{k}]"
        if not _square(report, f"{p}.S", exo.S):
            continue
        mk = exo.S.shape[0]
        if exo.E.shape != (mk,):
            report.add("error", f"{p}.E", f"length {exo.E.size} does not match S of size {mk}")
        if exo.w0.shape != (mk,):
            report.add("error", f"{p}.w0", f"length {exo.w0.size} does not match S of size {mk}")
        if S_ref is None:
            S_ref, m = exo.S, mk
        elif exo.S.shape != S_ref.shape or np.abs(exo.S - S_ref).max() > VALIDATION_TOL:
            report.add("error", f"{p}.S", "all channels must share the exosystem matrix S")
        if np.all(np.isfinite(exo.S)):
            re = np.linalg.eigvals(exo.S).real
            if np.abs(re).max() > VALIDATION_TOL:
                report.add("warning", f"{p}.S",
                           "eigenvalues off the imaginary axis: forcing is not persistently bounded")

    n = None
    if _square(report, "plant.frozen_A", plant.frozen_A):
        n = plant.frozen_A.shape[0]
    if plant.time_varying:
        if plant.A.shape != plant.frozen_A.shape:
            report.add("error", "plant.A_expr",
                       f"shape {plant.A.shape} does not match frozen_A {plant.frozen_A.shape}")
    if not plant.N_list:
        report.add("error", "plant.N", "at least one input vector is required")
    for k, N in enumerate(plant.N_list):
        if n is not None and N.shape != (n,):
            report.add("error", f"plant.N[{k}]", f"length {N.size} does not match A of size {n}")
    if exo_list and plant.N_list and len(exo_list) != len(plant.N_list):
        report.add("error", "plant.N",
                   f"{len(plant.N_list)} input vectors for {len(exo_list)} exosystems")

    if gains is not None and m is not None and n is not None:
        for name, size, want in (("L11", gains.L11.size, m), ("L12", gains.L12.size, n),
                                 ("L21", gains.L21.size, m), ("L22", gains.L22.size, n)):
            if size != want:
                report.add("error", f"gains.{name}", f"length {size}, expected {want}")

    if m is not None and n is not None and report.ok:
        from .ctrb import common_eigenvalue

        if common_eigenvalue(S_ref, plant.frozen_A):
            report.add("warning", "plant.frozen_A",
                       "A shares an eigenvalue with S: no controllable L1 exists")
    return report
