"""Spectra of Schroedinger operators on compact metric graphs.

Two independent solvers are provided.

* An exact eigenvalue counter: for ``lambda`` off the edge Dirichlet
  spectra, the number of eigenvalues below ``lambda`` equals the edge
  Dirichlet counts plus the negative index of the vertex matrix
  ``U* (R - T(lambda)) U``, where ``T`` is the Dirichlet-to-Neumann map of
  the edges and ``U`` spans the ranges of the ``Q(v)``. Edges whose
  Dirichlet spectrum is too close to ``lambda`` are split by a virtual
  degree-two Kirchhoff vertex. Bisection on this count locates
  eigenvalues and their multiplicities; the kernel dimension of the secular
  matrix ``M(lambda)`` is used as a cross-check.
* A lumped finite-element (second-order finite-difference) discretization,
  used as an oracle and for eigenvectors.

Counting is closed: ``n(H, lambda)`` counts eigenvalues ``<= lambda``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph_core import MetricGraph, Subgraph, TopologicalGraph
from .vertex_conditions import (ConditionAssignment, VertexCondition, assign, dirichlet,
                                neumann_type)

SVD_TOL = 1e-7
SPLIT_SIN = 0.1
_SPLIT_FRACTIONS = (0.5, 1 / 3, 0.4, 0.381966011250105, 0.3, 0.45, 0.276393202250021,
                    0.35, 0.42, 0.361803398874989, 0.25, 0.2)


class SolverError(RuntimeError):
    """Raised when a spectral computation cannot be carried out."""


class UnsupportedConditionError(SolverError):
    """The discretization oracle does not support a vertex condition."""


# ---------------------------------------------------------------- operator

@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Metric graph, vertex conditions and an edge-constant potential."""

    metric: MetricGraph
    conditions: ConditionAssignment
    potential: np.ndarray | None = None

    def __post_init__(self):
        g = self.metric.graph
        q = np.zeros(g.num_edges) if self.potential is None else np.asarray(self.potential, float)
        if q.shape != (g.num_edges,):
            raise SolverError("potential must be one value per edge")
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "potential", q)
        for v in g.vertices:
            c = self.conditions[v]
            if c.degree != g.degree(v):
                raise SolverError(f"condition at {v!r} has size {c.degree}, degree is {g.degree(v)}")

    @property
    def graph(self) -> TopologicalGraph:
        return self.metric.graph

    @property
    def c_pot(self) -> float:
        return float(np.abs(self.potential).max(initial=0.0))

    def with_conditions(self, conditions: ConditionAssignment) -> "OperatorSpec":
        return OperatorSpec(self.metric, conditions, self.potential)

    def with_lengths(self, lengths) -> "OperatorSpec":
        return OperatorSpec(self.metric.with_lengths(lengths), self.conditions, self.potential)

    @cached_property
    def _system(self):
        g = self.graph
        blocks = []
        cols = 0
        cplx = False
        for i, v in enumerate(g.vertices):
            basis = self.conditions[v].range_basis()
            cplx = cplx or np.iscomplexobj(basis) or np.iscomplexobj(self.conditions[v].R)
            blocks.append((g.vertex_slots[i], basis, cols))
            cols += basis.shape[1]
        dtype = complex if cplx else float
        u = np.zeros((2 * g.num_edges, cols), dtype=dtype)
        rred = np.zeros((cols, cols), dtype=dtype)
        for slots, basis, c0 in blocks:
            k = basis.shape[1]
            if k == 0:
                continue
            u[list(slots), c0:c0 + k] = basis
        for (slots, basis, c0), v in zip(blocks, g.vertices):
            k = basis.shape[1]
            if k == 0:
                continue
            r = self.conditions[v].R
            rred[c0:c0 + k, c0:c0 + k] = basis.conj().T @ r @ basis
        return u, rred

    @cached_property
    def _pairs(self):
        u, _ = self._system
        return _Pairs(u[0::2], u[1::2])

    def lower_bound(self) -> float:
        """A constant ``C0 >= 0`` with ``H >= -C0``.

        From ``|f(0)|^2 <= a ||f'||^2 + (2/a) ||f||^2`` on a segment of
        length ``a <= l_min/2`` and ``a <= 1/C``, where ``C`` bounds the
        negative part of ``R(v)``.
        """
        cneg = 0.0
        for c in self.conditions.conditions.values():
            if c.degree and np.any(c.R):
                w = np.linalg.eigvalsh((c.R + c.R.conj().T) / 2)
                cneg = max(cneg, -float(w.min()))
        qneg = max(0.0, -float(self.potential.min(initial=0.0)))
        if cneg == 0.0:
            return qneg
        a = min(self.metric.l_min / 2, 1.0 / cneg)
        return 2 * cneg / a + qneg


def make_operator(metric: MetricGraph, default="kirchhoff", overrides: Mapping | None = None,
                  dirichlet_set: Iterable = (), potential=None,
                  c_r: float | None = None) -> OperatorSpec:
    conds = assign(metric.graph, default, overrides, dirichlet_set, c_r)
    return OperatorSpec(metric, conds, potential)


def dirichlet_box(sub: Subgraph, lengths=1.0, potential=None) -> OperatorSpec:
    """Kirchhoff conditions inside ``sub`` and Dirichlet conditions on its boundary."""
    metric = sub.metric(lengths)
    return make_operator(metric, "kirchhoff", dirichlet_set=sub.boundary, potential=potential)


# ---------------------------------------------------------------- edge maps

def _edge_functions(z: np.ndarray, L: np.ndarray):
    """``c = cos(sqrt(z) L)``, ``s = sin(sqrt(z) L)/sqrt(z)`` (hyperbolic for z < 0)."""
    z = np.asarray(z, float)
    L = np.asarray(L, float)
    k = np.sqrt(np.abs(z))
    t = k * L
    pos = z >= 0
    with np.errstate(over="ignore", invalid="ignore"):
        c = np.where(pos, np.cos(t), np.cosh(t))
        sh = np.where(t > 0, np.sinh(t) / np.where(t > 0, t, 1.0), 1.0)
        s = np.where(pos, L * np.sinc(t / np.pi), L * sh)
    return c, s, k, t


def _dtn(z: np.ndarray, L: np.ndarray):
    """Entries ``a = -c/s`` (diagonal) and ``b = 1/s`` (off-diagonal) of the
    edge Dirichlet-to-Neumann map, with strict Dirichlet counts."""
    c, s, k, t = _edge_functions(z, L)
    neg = (z < 0) & (t > 1e-3)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        a = np.where(neg, -k / np.tanh(np.where(neg, t, 1.0)), -c / s)
        b = np.where(neg, 2 * k * np.exp(-np.where(neg, t, 0.0))
                     / (1 - np.exp(-2 * np.where(neg, t, 1.0))), 1 / s)
    cnt = np.where(z > 0, np.maximum(np.ceil(t / np.pi) - 1, 0), 0).astype(np.int64)
    return a, b, cnt


def _choose_split(t: float) -> float:
    best, score = 0.5, -1.0
    for p in _SPLIT_FRACTIONS:
        m = min(abs(math.sin(t * p)), abs(math.sin(t * (1 - p))))
        if m > score:
            best, score = p, m
        if m > 0.3:
            break
    return best


def _row_pairs(x: np.ndarray, y: np.ndarray):
    """All pairs ``(p, q)`` of nonzeros of ``x`` and ``y`` sharing a row.

    Returns flat output positions ``i * r + j``, the row of each pair and the
    products ``conj(x[e, i]) y[e, j]``.
    """
    r = x.shape[1]
    xr, xc = np.nonzero(x)
    yr, yc = np.nonzero(y)
    ny = np.bincount(yr, minlength=x.shape[0])
    ystart = np.concatenate([[0], np.cumsum(ny)[:-1]])
    reps = ny[xr]
    p = np.repeat(np.arange(xr.size), reps)
    offs = np.arange(p.size) - np.repeat(np.cumsum(reps) - reps, reps)
    q = ystart[xr[p]] + offs
    rows = xr[p]
    return xc[p] * r + yc[q], rows, x[rows, xc[p]].conj() * y[rows, yc[q]]


class _Pairs:
    """Scatter plan for ``W* [[a, b], [b, a]] W`` given the two end maps."""

    def __init__(self, wt: np.ndarray, wh: np.ndarray):
        self.n = wt.shape[1]
        parts = [(_row_pairs(wt, wt), 0), (_row_pairs(wh, wh), 0),
                 (_row_pairs(wt, wh), 1), (_row_pairs(wh, wt), 1)]
        self.pos = np.concatenate([pp[0] for pp, _ in parts])
        self.row = np.concatenate([pp[1] for pp, _ in parts])
        self.val = np.concatenate([pp[2] for pp, _ in parts])
        self.use_b = np.concatenate([np.full(pp[0].size, k, bool) for pp, k in parts])

    def form(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        w = self.val * np.where(self.use_b, b[self.row], a[self.row])
        size = self.n * self.n
        out = np.bincount(self.pos, w.real, size)
        if np.iscomplexobj(w):
            out = out + 1j * np.bincount(self.pos, w.imag, size)
        return out.reshape(self.n, self.n)


def count_below(op: OperatorSpec, lam: float) -> int:
    """Number of eigenvalues strictly below ``lam`` (exact inertia count)."""
    u, rred = op._system
    z = lam - op.potential
    L = op.metric.lengths
    k = np.sqrt(np.abs(z))
    t = k * L
    split = (z > 0) & (t > 1.0) & (np.abs(np.sin(t)) < SPLIT_SIN)
    r = rred.shape[0]
    ut, uh = u[0::2], u[1::2]
    if not split.any():
        a, b, cnt = _dtn(z, L)
        m = rred - op._pairs.form(a, b)
    else:
        idx = np.flatnonzero(split)
        ns = idx.size
        keep = np.flatnonzero(~split)
        frac = np.array([_choose_split(t[i]) for i in idx])
        pz = np.concatenate([z[keep], z[idx], z[idx]])
        pL = np.concatenate([L[keep], L[idx] * frac, L[idx] * (1 - frac)])
        # pieces: kept edges, then the tail halves and head halves of split edges,
        # with one extra variable per split point
        nk = keep.size
        wt = np.zeros((pz.size, r + ns), dtype=u.dtype)
        wh = np.zeros((pz.size, r + ns), dtype=u.dtype)
        mids = r + np.arange(ns)
        wt[:nk, :r] = ut[keep]
        wh[:nk, :r] = uh[keep]
        wt[nk:nk + ns, :r] = ut[idx]
        wh[nk + np.arange(ns), mids] = 1.0
        wt[nk + ns + np.arange(ns), mids] = 1.0
        wh[nk + ns:, :r] = uh[idx]
        a, b, cnt = _dtn(pz, pL)
        rp = np.zeros((r + ns, r + ns), dtype=u.dtype)
        rp[:r, :r] = rred
        m = rp - _Pairs(wt, wh).form(a, b)
    dircount = int(cnt.sum())
    if m.shape[0] == 0:
        return dircount
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    return dircount + int(np.sum(w < 0))


def _eta(lam: float, rel: float = 1e-10) -> float:
    return rel * max(1.0, abs(lam))


def count_eigenvalues(op: OperatorSpec, lam: float, closed: bool = True,
                      eta: float | None = None) -> int:
    """``n(H, lam)``; the closed count is taken as the strict count at
    ``lam + eta`` with ``eta = 1e-10 max(1, |lam|)`` by default."""
    if not closed:
        return count_below(op, lam)
    return count_below(op, lam + (_eta(lam) if eta is None else eta))


# ---------------------------------------------------------------- secular matrix

def secular_matrix(op: OperatorSpec, lam: float) -> np.ndarray:
    """Square matrix of size ``2|E|`` whose kernel dimension is the
    multiplicity of ``lam``.

    On edge ``e`` the unknowns are the coefficients of ``c(x)`` and
    ``m_e s(x)`` with ``m_e = max(1, sqrt|z_e|)``. Each vertex contributes
    ``deg v`` rows ``(I - Q) x + (Q x' - R x)/K_v``.
    """
    g = op.graph
    ne = g.num_edges
    z = lam - op.potential
    c, s, k, _ = _edge_functions(z, op.metric.lengths)
    m = np.maximum(1.0, k)
    val = np.zeros((2 * ne, 2 * ne))
    der = np.zeros((2 * ne, 2 * ne))
    e = np.arange(ne)
    val[2 * e, 2 * e] = 1.0
    der[2 * e, 2 * e + 1] = m
    val[2 * e + 1, 2 * e] = c
    val[2 * e + 1, 2 * e + 1] = m * s
    der[2 * e + 1, 2 * e] = z * s
    der[2 * e + 1, 2 * e + 1] = -m * c
    _, rred = op._system
    dtype = complex if np.iscomplexobj(rred) else float
    rows = np.zeros((2 * ne, 2 * ne), dtype=dtype)
    r0 = 0
    for i, v in enumerate(g.vertices):
        slots = list(g.vertex_slots[i])
        d = len(slots)
        cond = op.conditions[v]
        kv = max(1.0, float(np.max(k[[sl // 2 for sl in slots]])))
        x = val[slots]
        dx = der[slots]
        rows[r0:r0 + d] = (np.eye(d) - cond.Q) @ x + (cond.Q @ dx - cond.R @ x) / kv
        r0 += d
    return rows * np.repeat(_edge_scale(c), 2)


def _edge_scale(c: np.ndarray) -> np.ndarray:
    # common factor for both columns of an edge; only matters for z << 0
    return 1.0 / np.maximum(1.0, np.abs(c))


def kernel_dimension(op: OperatorSpec, lam: float, tol: float = SVD_TOL) -> int:
    """Number of singular values of the secular matrix below
    ``tol * max(1, sigma_max)``; rows are scaled to be of order one."""
    s = np.linalg.svd(secular_matrix(op, lam), compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s < tol * max(1.0, s[0])))


def supported_kernel_dimension(metric: MetricGraph, lam: float, closed_vertices: Iterable,
                               tol: float = SVD_TOL) -> int:
    """Dimension of Kirchhoff eigenfunctions at ``lam`` that live on ``metric``
    and extend by zero to a larger graph.

    ``closed_vertices`` are the vertices attached to edges outside ``metric``.
    There the values must vanish and the derivative sum over the edges of
    ``metric`` must be zero; at all other vertices the Kirchhoff conditions
    hold. The matrix is overdetermined; its numerical kernel is returned.
    """
    g = metric.graph
    ne = g.num_edges
    closed = set(closed_vertices)
    z = np.full(ne, float(lam))
    c, s, k, _ = _edge_functions(z, metric.lengths)
    m = np.maximum(1.0, k)
    val = np.zeros((2 * ne, 2 * ne))
    der = np.zeros((2 * ne, 2 * ne))
    e = np.arange(ne)
    val[2 * e, 2 * e] = 1.0
    der[2 * e, 2 * e + 1] = m
    val[2 * e + 1, 2 * e] = c
    val[2 * e + 1, 2 * e + 1] = m * s
    der[2 * e + 1, 2 * e] = z * s
    der[2 * e + 1, 2 * e + 1] = -m * c
    kv = max(1.0, float(k.max(initial=0.0)))
    rows = []
    for i, v in enumerate(g.vertices):
        slots = list(g.vertex_slots[i])
        d = len(slots)
        x, dx = val[slots], der[slots]
        if v in closed:
            rows.append(x)
        else:
            q = np.full((d, d), 1.0 / d)
            rows.append((np.eye(d) - q) @ x)
        rows.append(dx.sum(axis=0, keepdims=True) / kv)
    a = np.vstack(rows) * np.repeat(_edge_scale(c), 2)
    sv = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(sv < tol * max(1.0, sv[0])))


# ---------------------------------------------------------------- spectrum

@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues with multiplicities and solver metadata.

    ``flagged`` lists ``(lo, hi, count, kernel_dim)`` clusters whose
    multiplicity could not be confirmed by the secular matrix.
    """

    values: np.ndarray
    multiplicities: np.ndarray
    window: tuple
    solver: str
    tolerances: dict = field(default_factory=dict)
    flagged: tuple = ()

    @property
    def total(self) -> int:
        return int(np.sum(self.multiplicities))

    def expanded(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat(self.values, self.multiplicities)

    def resolution(self) -> float:
        return float(self.tolerances.get("resolution", 0.0))


def counting_function(spectrum: Spectrum, lam: float) -> int:
    """Number of eigenvalues ``<= lam`` (within the solver resolution)."""
    lo, hi = spectrum.window
    if lam < lo or lam > hi:
        raise SolverError(f"lambda={lam} outside the spectrum window [{lo}, {hi}]")
    res = spectrum.resolution() * max(1.0, abs(lam))
    return int(np.sum(spectrum.multiplicities[spectrum.values <= lam + res]))


def eigenvalues_in(op: OperatorSpec, window: Sequence[float], tol: float = 1e-11,
                   verify: bool = True, svd_tol: float = SVD_TOL) -> Spectrum:
    """All eigenvalues in the closed window, located by bisection on the
    exact count.

    Parameters
    ----------
    tol : float
        Relative bracket width ``tol * max(1, |lambda|)`` at which a cluster
        is reported.
    verify : bool
        Compare every multiplicity with the secular-matrix kernel dimension.
        Disagreements are kept with the count multiplicity and listed in
        ``flagged``.
    svd_tol : float
        Relative singular-value threshold for the kernel dimension.
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi >= lo:
        raise SolverError("empty window")
    c0 = op.lower_bound()
    if lo < -c0 - 1e-12:
        lo = -c0
    top = hi + _eta(hi)
    n_lo, n_hi = count_below(op, lo), count_below(op, top)
    stack = [(lo, top, n_lo, n_hi)]
    vals, mults, flags = [], [], []
    while stack:
        a, b, na, nb = stack.pop()
        if nb <= na:
            continue
        if b - a <= tol * max(1.0, abs(a)):
            lam = 0.5 * (a + b)
            mult = nb - na
            if verify:
                kd = kernel_dimension(op, lam, svd_tol)
                if kd != mult:
                    flags.append((a, b, mult, kd))
            vals.append(lam)
            mults.append(mult)
            continue
        mid = 0.5 * (a + b)
        nm = min(max(count_below(op, mid), na), nb)
        stack.append((mid, b, nm, nb))
        stack.append((a, mid, na, nm))
    order = np.argsort(vals)
    return Spectrum(np.asarray(vals, float)[order], np.asarray(mults, np.int64)[order],
                    (float(window[0]), float(window[1])), "inertia-bisection",
                    {"resolution": tol, "svd_tol": svd_tol}, tuple(flags))


def lowest_eigenvalues(op: OperatorSpec, count: int, tol: float = 1e-11,
                       verify: bool = False) -> Spectrum:
    """Window large enough to hold at least ``count`` eigenvalues, solved."""
    lo = -op.lower_bound()
    hi = max(1.0, 2 * abs(lo))
    while count_eigenvalues(op, hi) < count:
        hi *= 2
    return eigenvalues_in(op, (lo, hi), tol, verify)


# ---------------------------------------------------------------- discretization

def _node_layout(op: OperatorSpec):
    """Shared vertex nodes; returns per-slot node index (-1 for Dirichlet)
    and the diagonal vertex term for each node."""
    g = op.graph
    slot_node = np.full(2 * g.num_edges, -1, dtype=np.int64)
    diag: list[float] = []
    for i, v in enumerate(g.vertices):
        c = op.conditions[v]
        slots = g.vertex_slots[i]
        d = len(slots)
        kind = _classify(c)
        if kind == "dirichlet":
            continue
        if kind[0] == "delta":
            slot_node[list(slots)] = len(diag)
            diag.append(kind[1] * d)
        elif kind[0] == "neumann":
            for sl in slots:
                slot_node[sl] = len(diag)
                diag.append(kind[1])
    return slot_node, np.asarray(diag)


def _classify(c: VertexCondition):
    d = c.degree
    q, r = c.Q, c.R
    if np.abs(q).max(initial=0) < 1e-12:
        return "dirichlet"
    ones = np.full((d, d), 1.0 / d)
    if np.abs(q - ones).max() < 1e-12:
        s = float(np.real(r[0, 0])) * d
        if np.abs(r - s * ones).max() < 1e-12:
            return ("delta", s)
    eye = np.eye(d)
    if np.abs(q - eye).max() < 1e-12:
        s = float(np.real(r[0, 0]))
        if np.abs(r - s * eye).max() < 1e-12:
            return ("neumann", s)
    raise UnsupportedConditionError(
        f"condition of kind {c.kind!r} is not supported by the discretization; "
        "use the secular solver")


@dataclass(frozen=True, eq=False)
class Discretization:
    """Lumped P1 stiffness ``K`` and diagonal mass ``mass`` on edge nodes.

    ``edge_nodes[e]`` lists the node indices along edge ``e`` from tail to
    head (``-1`` marks a Dirichlet end) and ``edge_h[e]`` the step.
    """

    K: sp.csr_matrix
    mass: np.ndarray
    edge_nodes: tuple
    edge_h: np.ndarray

    @property
    def size(self) -> int:
        return self.mass.size

    def solve(self, upper: float | None = None, count: int | None = None,
              vectors: bool = False):
        """Lowest eigenpairs of ``K u = lam M u``.

        Exactly one of ``upper`` (all eigenvalues ``<= upper``) and
        ``count`` selects the eigenvalues. Eigenvectors are ``M``-orthonormal.
        """
        n = self.size
        if n == 0:
            return (np.zeros(0), np.zeros((0, 0))) if vectors else np.zeros(0)
        dm = 1.0 / np.sqrt(self.mass)
        a = sp.diags(dm) @ self.K @ sp.diags(dm)
        if n <= 6000:
            dense = a.toarray()
            kw = {}
            if count is not None:
                kw["subset_by_index"] = (0, min(count, n) - 1)
            elif upper is not None:
                kw["subset_by_value"] = (-np.inf, upper)
            if vectors:
                w, v = sla.eigh(dense, driver="evr", **kw)
            else:
                w = sla.eigh(dense, eigvals_only=True, driver="evr", **kw)
        else:
            k = count if count is not None else None
            if k is None:
                raise SolverError("large discretizations need an explicit eigenvalue count")
            shift = -1.0 - float(abs(a.diagonal()).min())
            res = spla.eigsh(a.tocsc(), k=min(k, n - 1), sigma=shift, which="LM",
                             return_eigenvectors=vectors)
            if vectors:
                w, v = res
                o = np.argsort(w)
                w, v = w[o], v[:, o]
            else:
                w = np.sort(res)
        if vectors:
            return w, dm[:, None] * v
        return w


def discretize(op: OperatorSpec, m: float | None = None,
               segments: Sequence[int] | None = None) -> Discretization:
    """Build the lumped discretization with ``ceil(m * l_e)`` segments per
    edge (at least 2), or with explicit ``segments``."""
    g = op.graph
    L = op.metric.lengths
    if segments is None:
        if m is None or m < 4:
            raise SolverError("mesh density must be at least 4 points per unit length")
        segments = np.maximum(2, np.ceil(m * L - 1e-9)).astype(np.int64)
    segments = np.asarray(segments, dtype=np.int64)
    slot_node, vdiag = _node_layout(op)
    nv = vdiag.size
    rows, cols, data = [], [], []
    mass = list(np.zeros(nv))
    diag_extra = list(vdiag)
    edge_nodes = []
    hs = L / segments
    nxt = nv
    for e in range(g.num_edges):
        ns = int(segments[e])
        h = float(hs[e])
        interior = list(range(nxt, nxt + ns - 1))
        nxt += ns - 1
        mass.extend([0.0] * (ns - 1))
        diag_extra.extend([0.0] * (ns - 1))
        nodes = [int(slot_node[2 * e])] + interior + [int(slot_node[2 * e + 1])]
        edge_nodes.append(tuple(nodes))
        q = float(op.potential[e])
        for j in range(ns):
            p, r = nodes[j], nodes[j + 1]
            for x in (p, r):
                if x >= 0:
                    mass[x] += h / 2
                    rows.append(x)
                    cols.append(x)
                    data.append(1.0 / h + q * h / 2)
            if p >= 0 and r >= 0:
                rows += [p, r]
                cols += [r, p]
                data += [-1.0 / h, -1.0 / h]
    n = nxt
    rows += list(range(n))
    cols += list(range(n))
    data += diag_extra
    K = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    return Discretization(K, np.asarray(mass), tuple(edge_nodes), hs)


def _group(values: np.ndarray, rel: float) -> tuple[np.ndarray, np.ndarray]:
    vals, mults = [], []
    for x in np.sort(values):
        if vals and abs(x - vals[-1]) <= rel * max(1.0, abs(x)):
            mults[-1] += 1
        else:
            vals.append(x)
            mults.append(1)
    return np.asarray(vals), np.asarray(mults, np.int64)


def discretize_and_solve(op: OperatorSpec, m: float, count: int | None = None,
                         upper: float | None = None, group_rel: float = 1e-9) -> Spectrum:
    """Eigenvalues of the lumped discretization at mesh density ``m``.

    Values closer than ``group_rel`` (relative) are merged into one entry
    with multiplicity.
    """
    if count is None and upper is None:
        count = 10
    d = discretize(op, m)
    w = d.solve(upper=upper, count=count)
    vals, mults = _group(w, group_rel)
    h = float(d.edge_h.max(initial=0.0))
    win = (float(w.min(initial=0.0)), float(upper if upper is not None else w.max(initial=0.0)))
    return Spectrum(vals, mults, win, "fd-lumped", {"mesh_density": m, "h_max": h,
                                                    "group_rel": group_rel})


@dataclass(frozen=True)
class RichardsonEstimate:
    """Eigenvalues on meshes ``h``, ``h/2``, ``h/4`` with extrapolation.

    ``extrapolated = (4 lam_{h/2} - lam_h)/3``; ``error`` is
    ``|extrapolated - lam_{h/2}|``; ``order`` is the observed convergence
    order from the three meshes.
    """

    coarse: np.ndarray
    fine: np.ndarray
    finest: np.ndarray
    extrapolated: np.ndarray
    error: np.ndarray
    order: np.ndarray


def richardson(op: OperatorSpec, m: float, count: int) -> RichardsonEstimate:
    """Richardson extrapolation over meshes with exactly halved steps."""
    L = op.metric.lengths
    base = np.maximum(2, np.ceil(m * L - 1e-9)).astype(np.int64)
    lam = [discretize(op, segments=base * f).solve(count=count) for f in (1, 2, 4)]
    extr = (4 * lam[1] - lam[0]) / 3
    with np.errstate(divide="ignore", invalid="ignore"):
        order = np.log2(np.abs(lam[0] - lam[1]) / np.abs(lam[1] - lam[2]))
    return RichardsonEstimate(lam[0], lam[1], lam[2], extr, np.abs(extr - lam[1]), order)


# ---------------------------------------------------------------- comparisons

@dataclass(frozen=True)
class SpectralShift:
    xi: int
    bound: int
    v_diff: tuple

    @property
    def within_bound(self) -> bool:
        return abs(self.xi) <= self.bound


def differing_vertices(op1: OperatorSpec, op2: OperatorSpec, tol: float = 1e-12) -> tuple:
    _same_graph(op1, op2)
    out = []
    for v in op1.graph.vertices:
        c1, c2 = op1.conditions[v], op2.conditions[v]
        if np.abs(c1.Q - c2.Q).max() > tol or np.abs(c1.R - c2.R).max() > tol:
            out.append(v)
    return tuple(out)


def _same_graph(op1: OperatorSpec, op2: OperatorSpec):
    g1, g2 = op1.graph, op2.graph
    if g1 is g2 and np.array_equal(op1.metric.lengths, op2.metric.lengths):
        return
    if (g1.vertices != g2.vertices or g1.edges != g2.edges or g1.ends != g2.ends
            or not np.array_equal(op1.metric.lengths, op2.metric.lengths)
            or not np.array_equal(op1.potential, op2.potential)):
        raise SolverError("spectral shift needs both operators on the same metric graph")


def spectral_shift(op1: OperatorSpec, op2: OperatorSpec, lam: float) -> SpectralShift:
    """``xi = n(H2, lam) - n(H1, lam)`` and the bound ``2 sum_{V_diff} deg v``."""
    vd = differing_vertices(op1, op2)
    bound = 2 * sum(op1.graph.degree(v) for v in vd)
    xi = count_eigenvalues(op2, lam) - count_eigenvalues(op1, lam)
    return SpectralShift(int(xi), int(bound), vd)


def rescale_lengths(op: OperatorSpec, s: float) -> tuple[OperatorSpec, str | None]:
    """Lengths multiplied by ``exp(s)``.

    Returns the new operator and a warning string when the scaling identity
    ``lam_i -> exp(-2s) lam_i`` is not guaranteed (nonzero potential or
    conditions other than Kirchhoff/Dirichlet).
    """
    new = op.with_lengths(op.metric.lengths * math.exp(s))
    warn = None
    if np.any(op.potential != 0):
        warn = "nonzero potential: the scaling identity does not apply"
    elif any(c.kind not in ("kirchhoff", "dirichlet") and not
             (c.kind == "delta" and c.strength == 0)
             for c in op.conditions.conditions.values()):
        warn = "conditions other than Kirchhoff/Dirichlet: the scaling identity does not apply"
    if warn:
        warnings.warn(warn, stacklevel=2)
    return new, warn


@dataclass(frozen=True, eq=False)
class Decoupled:
    """Dirichlet- and Neumann-type decoupled operators on ``Lambda + Lambda'``."""

    dirichlet: OperatorSpec
    neumann: OperatorSpec
    interface: tuple


def decouple(op: OperatorSpec, edges: Iterable) -> Decoupled:
    """Split the graph along the vertices shared by ``edges`` and the rest.

    Interface vertices are doubled. The Dirichlet version puts Dirichlet
    conditions on every copy; the Neumann-type version puts ``(C^{E_v}, -C_R)``
    on every copy, with ``C_R`` the declared bound (or the attained one).
    Other vertices keep their conditions.
    """
    g = op.graph
    chosen = set()
    for e in edges:
        if not g.has_edge(e):
            raise SolverError(f"{e!r} is not an edge of the graph; subgraphs must be edge-aligned")
        chosen.add(e)
    side = np.array([0 if e in chosen else 1 for e in g.edges])
    inter = []
    for i, v in enumerate(g.vertices):
        sides = {int(side[sl // 2]) for sl in g.vertex_slots[i]}
        if len(sides) == 2:
            inter.append(v)
    inter_set = set(inter)
    copies = {(v, k) for v in inter for k in (0, 1)}
    c_r = op.conditions.c_r
    if c_r is None:
        c_r = op.conditions.attained_c_r()

    def label(v, s):
        return (v, s) if v in inter_set else v

    ends = tuple((label(t, int(side[i])), label(h, int(side[i])))
                 for i, (t, h) in enumerate(g.ends))
    verts = []
    for v in g.vertices:
        if v in inter_set:
            verts += [(v, 0), (v, 1)]
        else:
            verts.append(v)
    ng = TopologicalGraph(tuple(verts), g.edges, ends)
    metric = MetricGraph(ng, op.metric.lengths)
    dconds, nconds = {}, {}
    for v in ng.vertices:
        if v in copies:
            deg = ng.degree(v)
            dconds[v] = dirichlet(deg)
            nconds[v] = neumann_type(deg, -c_r)
        else:
            dconds[v] = op.conditions[v]
            nconds[v] = op.conditions[v]
    dset = frozenset(v for v in ng.vertices if dconds[v].kind == "dirichlet")
    dirop = OperatorSpec(metric, ConditionAssignment(dconds, op.conditions.c_r, dset),
                         op.potential)
    neuop = OperatorSpec(metric, ConditionAssignment(nconds, op.conditions.c_r,
                                                     op.conditions.dirichlet_set),
                         op.potential)
    return Decoupled(dirop, neuop, tuple(inter))


def weyl_deviation_bound(op: OperatorSpec) -> int:
    """``2 sum_v deg v``: bound on ``|n(H, lam) - vol sqrt(lam)/pi|`` for ``q = 0``."""
    return int(2 * op.graph.degrees().sum())
