"""Quadratic constraint descriptions for the admissible nonlinearity class.

A :class:`QuadConstraint` bounds the pairs ``(z, f(t,z))`` through

    [z; v]^T [[Qhat, Shat], [Shat^T, Rhat]] [z; v] >= 0,

with ``z = H x``.  Builders cover the catalogued nonlinearity families
(Lipschitz bounds, partial-gradient boxes, strongly convex gradients,
sector bounds, monotone recurrent networks, passive maps).  ``lift``
produces the state-space form ``(Q, S, R)`` used by the synthesis LMIs.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .matcore import (
    Definiteness,
    MatrixError,
    as_matrix,
    as_symmetric,
    definiteness,
    row_rank,
)

__all__ = [
    "ConstraintKind",
    "QuadConstraint",
    "LiftedConstraint",
    "RegularityResult",
    "build_lipschitz",
    "build_sector",
    "build_convex_gradient",
    "build_partial_gradient_bounds",
    "build_rnn",
    "build_passive",
    "lift",
    "evaluate",
    "check_regularity",
    "constraint_to_dict",
    "constraint_from_dict",
    "save_constraint",
    "load_constraint",
]


class ConstraintKind(enum.Enum):
    STRICT_R = "strict_r"       # Rhat strictly negative definite
    PASSIVE = "passive"         # Qhat = 0, Rhat = 0, sector [0, inf]


@dataclass(frozen=True)
class QuadConstraint:
    """Quadratic bound on admissible (z, v) pairs, plus the output map H."""

    qhat: np.ndarray
    shat: np.ndarray
    rhat: np.ndarray
    h: np.ndarray
    kind: ConstraintKind
    # metadata set by specific builders; used by fast paths downstream
    sector: Optional[tuple] = field(default=None, compare=False)
    selection: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        qhat = as_symmetric(self.qhat, "Qhat")
        shat = as_matrix(self.shat, "Shat")
        rhat = as_symmetric(self.rhat, "Rhat")
        h = as_matrix(self.h, "H")
        p, q = shat.shape
        if qhat.shape != (p, p):
            raise MatrixError(f"Qhat shape {qhat.shape} inconsistent with Shat rows {p}")
        if rhat.shape != (q, q):
            raise MatrixError(f"Rhat shape {rhat.shape} inconsistent with Shat cols {q}")
        if h.shape[0] != p:
            raise MatrixError(f"H has {h.shape[0]} rows, expected p={p}")
        if self.kind is ConstraintKind.STRICT_R:
            if definiteness(rhat) is not Definiteness.ND:
                raise MatrixError("STRICT_R constraint requires Rhat negative definite")
        elif self.kind is ConstraintKind.PASSIVE:
            if definiteness(qhat) is not Definiteness.ZERO:
                raise MatrixError("PASSIVE constraint requires Qhat = 0")
            if definiteness(rhat) is not Definiteness.ZERO:
                raise MatrixError("PASSIVE constraint requires Rhat = 0")
            if row_rank(shat.T) != q:
                raise MatrixError("PASSIVE constraint requires Shat with full column rank")
        object.__setattr__(self, "qhat", qhat)
        object.__setattr__(self, "shat", shat)
        object.__setattr__(self, "rhat", rhat)
        object.__setattr__(self, "h", h)

    @property
    def p(self) -> int:
        return self.shat.shape[0]

    @property
    def q(self) -> int:
        return self.shat.shape[1]

    @property
    def n(self) -> int:
        return self.h.shape[1]

    def block(self) -> np.ndarray:
        """The (p+q) x (p+q) symmetric matrix of the quadratic form."""
        return np.block([[self.qhat, self.shat], [self.shat.T, self.rhat]])


@dataclass(frozen=True)
class LiftedConstraint:
    """State-space form (Q, S, R) of a constraint after congruence with H."""

    q: np.ndarray
    s: np.ndarray
    r: np.ndarray
    q_class: Definiteness
    kind: ConstraintKind

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def nv(self) -> int:
        return self.r.shape[0]

    def block(self) -> np.ndarray:
        return np.block([[self.q, self.s], [self.s.T, self.r]])


def build_lipschitz(ell: float, p: int, q: int, h=None) -> QuadConstraint:
    """Norm-bounded nonlinearity: ||f(t,z)|| <= ell ||z||."""
    if ell <= 0:
        raise ValueError("Lipschitz bound ell must be positive")
    h = np.eye(p) if h is None else as_matrix(h, "H")
    return QuadConstraint(
        qhat=ell**2 * np.eye(p),
        shat=np.zeros((p, q)),
        rhat=-np.eye(q),
        h=h,
        kind=ConstraintKind.STRICT_R,
    )


def build_sector(k1, k2, h=None) -> QuadConstraint:
    """Sector-bounded nonlinearity: (v - K1 z)^T (K2 z - v) >= 0."""
    k1 = as_matrix(k1, "K1")
    k2 = as_matrix(k2, "K2")
    if k1.shape != k2.shape:
        raise MatrixError(f"K1 shape {k1.shape} != K2 shape {k2.shape}")
    q, p = k1.shape
    h = np.eye(p) if h is None else as_matrix(h, "H")
    return QuadConstraint(
        qhat=-(k2.T @ k1 + k1.T @ k2),
        shat=k1.T + k2.T,
        rhat=-2.0 * np.eye(q),
        h=h,
        kind=ConstraintKind.STRICT_R,
        sector=(k1, k2),
    )


def build_convex_gradient(m: float, ell: float, n: int) -> QuadConstraint:
    """Gradient of an m-strongly convex function with ell-Lipschitz gradient."""
    if not 0 < m < ell:
        raise ValueError(f"require 0 < m < ell, got m={m}, ell={ell}")
    return QuadConstraint(
        qhat=-2.0 * m * ell * np.eye(n),
        shat=(ell + m) * np.eye(n),
        rhat=-2.0 * np.eye(n),
        h=np.eye(n),
        kind=ConstraintKind.STRICT_R,
    )


def build_partial_gradient_bounds(fbar, funder) -> QuadConstraint:
    """Elementwise partial-derivative box bounds, two-state case only.

    The printed form of the bound matrix exists only for n = 2; the
    selection matrix ``I_2 (x) [1 1]`` that recombines the four component
    outputs is recorded in ``selection`` for the caller.
    """
    fbar = as_matrix(fbar, "fbar")
    funder = as_matrix(funder, "funder")
    if fbar.shape != (2, 2) or funder.shape != (2, 2):
        raise ValueError("partial-gradient bounds are only supported for n = 2")
    if np.any(fbar < funder):
        raise ValueError("fbar must dominate funder elementwise")
    c = 0.5 * (fbar + funder)
    cbar = 0.5 * (fbar - funder)
    qhat = np.diag([
        (cbar[0, 0] - c[0, 0]) + (cbar[1, 0] - c[1, 0]),
        (cbar[0, 1] - c[0, 1]) + (cbar[1, 1] - c[1, 1]),
    ])
    shat = np.array([
        [c[0, 0], 0.0, c[1, 0], 0.0],
        [0.0, c[0, 1], 0.0, c[1, 1]],
    ])
    selection = np.kron(np.eye(2), np.ones((1, 2)))  # maps stacked v to f
    return QuadConstraint(
        qhat=qhat,
        shat=shat,
        rhat=-np.eye(4),
        h=np.eye(2),
        kind=ConstraintKind.STRICT_R,
        selection=selection,
    )


def build_rnn(gamma) -> QuadConstraint:
    """Monotone recurrent-network nonlinearity with multiplier matrix Gamma.

    Gamma must be symmetric with negative off-diagonal entries and strictly
    positive row sums; those sign conditions make -2 Gamma negative definite.
    """
    gamma = as_symmetric(gamma, "Gamma")
    p = gamma.shape[0]
    off = gamma[~np.eye(p, dtype=bool)]
    if off.size and not np.all(off < 0):
        raise ValueError("Gamma off-diagonal entries must be strictly negative")
    if not np.all(gamma.sum(axis=1) > 0):
        raise ValueError("Gamma row sums must be strictly positive")
    return QuadConstraint(
        qhat=np.zeros((p, p)),
        shat=gamma,
        rhat=-2.0 * gamma,
        h=np.eye(p),
        kind=ConstraintKind.STRICT_R,
    )


def build_passive(h) -> QuadConstraint:
    """Passive nonlinearity z^T f(t,z) >= 0 (sector [0, inf]), p = q."""
    h = as_matrix(h, "H")
    if np.all(h == 0.0):
        raise ValueError("H must be nonzero for a passive constraint")
    p = h.shape[0]
    return QuadConstraint(
        qhat=np.zeros((p, p)),
        shat=np.eye(p),
        rhat=np.zeros((p, p)),
        h=h,
        kind=ConstraintKind.PASSIVE,
    )


def lift(c: QuadConstraint, n: int) -> LiftedConstraint:
    """Congruence of (Qhat, Shat, Rhat) by blockdiag(H, I)."""
    if c.h.shape[1] != n:
        raise MatrixError(f"H has {c.h.shape[1]} columns, expected n={n}")
    q = c.h.T @ c.qhat @ c.h
    q = 0.5 * (q + q.T)
    s = c.h.T @ c.shat
    r = c.rhat.copy()
    return LiftedConstraint(q=q, s=s, r=r, q_class=definiteness(q), kind=c.kind)


def evaluate(c: QuadConstraint, z, v) -> float:
    """Value of the quadratic form at a single pair (z, v)."""
    z = np.asarray(z, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if z.size != c.p or v.size != c.q:
        raise MatrixError(
            f"evaluate expects z of size {c.p} and v of size {c.q}, "
            f"got {z.size} and {v.size}"
        )
    w = np.concatenate([z, v])
    return float(w @ c.block() @ w)


@dataclass(frozen=True)
class RegularityResult:
    regular: bool
    witness: Optional[tuple]          # (z, v) with z in the range of H
    analytic: bool = False


def _diagonal_sector_fast_path(c: QuadConstraint, tol: float):
    if c.sector is None:
        return None
    k1, k2 = c.sector
    if k1.shape[0] != k1.shape[1]:
        return None
    if np.any(k1 - np.diag(np.diag(k1))) or np.any(k2 - np.diag(np.diag(k2))):
        return None
    if definiteness(k2 - k1) is not Definiteness.PD:
        return None
    # witness with z in im(H): push the largest row of H through the map
    row = int(np.argmax(np.linalg.norm(c.h, axis=1)))
    x = c.h[row]
    z = c.h @ x
    if np.linalg.norm(z) == 0.0:
        return None
    v = 0.5 * (k1 + k2) @ z
    value = evaluate(c, z, v)
    if value <= tol * (np.linalg.norm(z) ** 2 + np.linalg.norm(v) ** 2):
        return None
    return RegularityResult(True, (z, v), analytic=True)


def check_regularity(
    c: QuadConstraint,
    n: int,
    budget: int = 2048,
    seed: int = 0,
    tol: float = 1e-9,
) -> RegularityResult:
    """Search for a pair at which the constraint holds strictly.

    Decoupled sector bounds with K2 - K1 positive definite are decided
    analytically.  Otherwise a randomized search over pairs (Hx, v) is run
    (seeded, `budget` samples, plus the top eigenvector of the lifted block
    as a deterministic candidate).  A failed search returns regular=False;
    the test is sound but not complete.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    fast = _diagonal_sector_fast_path(c, tol)
    if fast is not None:
        return fast

    lc = lift(c, n)
    candidates = []
    eigs, vecs = np.linalg.eigh(lc.block())
    top = vecs[:, -1]
    candidates.append((top[:n], top[n:]))
    rng = np.random.default_rng(seed)
    xs = rng.normal(size=(budget, n))
    vs = rng.normal(size=(budget, c.q))
    for x, v in zip(xs, vs):
        candidates.append((x, v))
    for x, v in candidates:
        z = c.h @ x
        norm2 = float(z @ z + v @ v)
        if norm2 == 0.0:
            continue
        scale = 1.0 / np.sqrt(norm2)
        z, v = z * scale, v * scale
        if evaluate(c, z, v) > tol:
            return RegularityResult(True, (z, v))
    return RegularityResult(False, None)


# ---------------------------------------------------------------------------
# serialization

def constraint_to_dict(c: QuadConstraint) -> dict:
    return {
        "kind": c.kind.value,
        "Qhat": c.qhat.tolist(),
        "Shat": c.shat.tolist(),
        "Rhat": c.rhat.tolist(),
        "H": c.h.tolist(),
    }


def constraint_from_dict(d: dict) -> QuadConstraint:
    try:
        kind = ConstraintKind(d["kind"])
        return QuadConstraint(
            qhat=np.asarray(d["Qhat"], dtype=float),
            shat=np.asarray(d["Shat"], dtype=float),
            rhat=np.asarray(d["Rhat"], dtype=float),
            h=np.asarray(d["H"], dtype=float),
            kind=kind,
        )
    except KeyError as exc:
        raise MatrixError(f"constraint dict missing field {exc}") from exc


def save_constraint(c: QuadConstraint, path) -> None:
    with open(path, "w") as fh:
        json.dump(constraint_to_dict(c), fh, indent=2)


def load_constraint(path) -> QuadConstraint:
    with open(path) as fh:
        return constraint_from_dict(json.load(fh))
