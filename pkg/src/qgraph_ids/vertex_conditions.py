"""Self-adjoint vertex conditions in the ``(Q, R)`` parametrization.

At a vertex of degree ``d`` the boundary values ``x`` and derivatives ``x'``
(one entry per edge end, derivatives taken along the edge away from the
vertex) must satisfy ``(I - Q) x = 0`` and ``Q x' = R x``. ``Q`` is an
orthogonal projection and ``R = Q R Q`` is Hermitian. With this sign
convention the quadratic form is ``||f'||^2 + sum_v <R x, x>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

TOL = 1e-12


class ConditionError(ValueError):
    """Raised for invalid or inconsistent vertex conditions."""


@dataclass(frozen=True, eq=False)
class VertexCondition:
    """Single-vertex condition. ``kind`` is a descriptive tag."""

    Q: np.ndarray
    R: np.ndarray
    kind: str = "general"
    strength: float = 0.0

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.Q))
        r = np.atleast_2d(np.asarray(self.R))
        if q.shape != r.shape or q.shape[0] != q.shape[1]:
            raise ConditionError("Q and R must be square of equal size")
        q = q.copy()
        r = r.copy()
        q.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "R", r)

    @property
    def degree(self) -> int:
        return self.Q.shape[0]

    @property
    def norm_R(self) -> float:
        return float(np.linalg.norm(self.R, 2)) if self.degree else 0.0

    def range_basis(self) -> np.ndarray:
        """Orthonormal basis of ``ran Q`` as columns."""
        if self.kind in ("kirchhoff", "delta"):
            return np.full((self.degree, 1), 1.0 / np.sqrt(self.degree))
        if self.kind == "dirichlet":
            return np.zeros((self.degree, 0))
        if self.kind in ("neumann", "neumann-type"):
            return np.eye(self.degree)
        w, v = np.linalg.eigh((self.Q + self.Q.conj().T) / 2)
        return v[:, w > 0.5]

    def constraint_matrix(self) -> np.ndarray:
        """Rows of ``[(I-Q) | 0 ; -R | Q]`` acting on ``(x, x')``."""
        d = self.degree
        eye = np.eye(d)
        top = np.hstack([eye - self.Q, np.zeros((d, d))])
        bottom = np.hstack([-self.R, self.Q])
        return np.vstack([top, bottom])

    def satisfied_by(self, x, dx, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=complex)
        dx = np.asarray(dx, dtype=complex)
        r1 = (np.eye(self.degree) - self.Q) @ x
        r2 = self.Q @ dx - self.R @ x
        return bool(max(np.abs(r1).max(initial=0), np.abs(r2).max(initial=0)) <= tol)

    def lagrangian_dimension(self) -> int:
        """Dimension of the solution set ``{(x, x')}``; equals the degree."""
        m = self.constraint_matrix()
        if m.size == 0:
            return 0
        s = np.linalg.svd(m, compute_uv=False)
        return int(2 * self.degree - np.sum(s > 1e-10 * max(1.0, s[0])))


def _check_deg(deg: int) -> int:
    deg = int(deg)
    if deg < 1:
        raise ConditionError("vertex degree must be at least 1")
    return deg


def kirchhoff(deg: int) -> VertexCondition:
    """Continuity plus vanishing derivative sum."""
    deg = _check_deg(deg)
    return VertexCondition(np.full((deg, deg), 1.0 / deg), np.zeros((deg, deg)), "kirchhoff")


def delta(deg: int, strength: float) -> VertexCondition:
    """Continuity plus derivative sum equal to ``strength`` times the value."""
    deg = _check_deg(deg)
    q = np.full((deg, deg), 1.0 / deg)
    return VertexCondition(q, float(strength) * q, "delta", float(strength))


def dirichlet(deg: int) -> VertexCondition:
    deg = _check_deg(deg)
    return VertexCondition(np.zeros((deg, deg)), np.zeros((deg, deg)), "dirichlet")


def neumann(deg: int) -> VertexCondition:
    """Decoupled ends with vanishing derivatives."""
    deg = _check_deg(deg)
    return VertexCondition(np.eye(deg), np.zeros((deg, deg)), "neumann")


def neumann_type(deg: int, r: float) -> VertexCondition:
    """Decoupled ends with ``x' = r x`` (the condition ``(C^{E_v}, r)``)."""
    deg = _check_deg(deg)
    if r == 0:
        return neumann(deg)
    return VertexCondition(np.eye(deg), float(r) * np.eye(deg), "neumann-type", float(r))


def general(Q, R) -> VertexCondition:
    return VertexCondition(np.asarray(Q), np.asarray(R), "general")


def parse_condition(spec, deg: int) -> VertexCondition:
    """Condition from a config value.

    Accepts ``"kirchhoff"``, ``"dirichlet"``, ``"neumann"``,
    ``{"delta": s}`` or ``{"Q": [[..]], "R": [[..]]}``.
    """
    if isinstance(spec, VertexCondition):
        if spec.degree != deg:
            raise ConditionError(f"condition has size {spec.degree}, vertex degree is {deg}")
        return spec
    if isinstance(spec, str):
        builders = {"kirchhoff": kirchhoff, "dirichlet": dirichlet, "neumann": neumann}
        if spec not in builders:
            raise ConditionError(f"unknown condition {spec!r}")
        return builders[spec](deg)
    if isinstance(spec, Mapping):
        if "delta" in spec:
            return delta(deg, float(spec["delta"]))
        if "Q" in spec:
            q = np.asarray(spec["Q"], dtype=complex)
            r = np.asarray(spec.get("R", np.zeros_like(q)), dtype=complex)
            if np.all(q.imag == 0) and np.all(r.imag == 0):
                q, r = q.real, r.real
            c = general(q, r)
            if c.degree != deg:
                raise ConditionError(f"explicit Q has size {c.degree}, vertex degree is {deg}")
            return c
    raise ConditionError(f"cannot parse condition {spec!r}")


@dataclass(frozen=True, eq=False)
class ConditionAssignment:
    """One condition per vertex of a graph, in the graph's edge-end order.

    ``dirichlet_set`` marks vertices carrying Dirichlet conditions because
    they are on a decoupling boundary. ``c_r`` is the declared bound on
    ``||R(v)||`` (None if not declared).
    """

    conditions: Mapping
    c_r: float | None = None
    dirichlet_set: frozenset = field(default_factory=frozenset)

    def __getitem__(self, v) -> VertexCondition:
        return self.conditions[v]

    def attained_c_r(self) -> float:
        return max((c.norm_R for c in self.conditions.values()), default=0.0)

    def replace(self, updates: Mapping) -> "ConditionAssignment":
        new = dict(self.conditions)
        new.update(updates)
        dset = frozenset(v for v in self.dirichlet_set if new[v].kind == "dirichlet")
        return ConditionAssignment(new, self.c_r, dset)


def assign(graph, default="kirchhoff", overrides: Mapping | None = None,
           dirichlet_set=(), c_r: float | None = None) -> ConditionAssignment:
    """Assignment on ``graph`` (a :class:`CombinatorialGraph`).

    Vertices in ``dirichlet_set`` get Dirichlet conditions; others use
    ``overrides`` or ``default``.
    """
    overrides = dict(overrides or {})
    dset = frozenset(dirichlet_set)
    conds = {}
    for v in graph.vertices:
        deg = graph.degree(v)
        if deg == 0:
            raise ConditionError(f"isolated vertex {v!r}")
        if v in dset:
            conds[v] = dirichlet(deg)
        else:
            conds[v] = parse_condition(overrides.get(v, default), deg)
    return ConditionAssignment(conds, c_r, dset)


@dataclass(frozen=True)
class ValidationReport:
    c_r_attained: float
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(assignment: ConditionAssignment, tol: float = TOL) -> ValidationReport:
    """Check projector, Hermiticity and ``R = QRQ`` identities at every vertex.

    Returns the attained ``sup ||R(v)||`` and a tuple of violation messages;
    the assignment is not modified.
    """
    issues = []
    for v, c in assignment.conditions.items():
        q, r = c.Q, c.R
        if np.abs(q @ q - q).max(initial=0) > tol:
            issues.append(f"{v!r}: Q is not idempotent")
        if np.abs(q - q.conj().T).max(initial=0) > tol:
            issues.append(f"{v!r}: Q is not self-adjoint")
        if np.abs(r - r.conj().T).max(initial=0) > tol:
            issues.append(f"{v!r}: R is not Hermitian")
        if np.abs(q @ r @ q - r).max(initial=0) > tol:
            issues.append(f"{v!r}: R does not act on ran Q")
    attained = assignment.attained_c_r()
    if assignment.c_r is not None and attained > assignment.c_r + tol:
        issues.append(f"sup ||R(v)|| = {attained:g} exceeds declared bound {assignment.c_r:g}")
    return ValidationReport(attained, tuple(issues))
