"""Combinatorial Laplacians, Kagome hexagon states, Floquet bands and the
metric/combinatorial spectral correspondence."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graph_core import (CombinatorialGraph, GraphError, LatticePatch, PeriodicGraph,
                         combinatorial_box, kagome_lattice)

FLAT = 1.5


# ---------------------------------------------------------------- Laplacian

def comb_laplacian(graph: CombinatorialGraph, degrees: np.ndarray | float | None = None) -> np.ndarray:
    """Matrix of ``(Delta f)(v) = (1/deg v) sum_{w ~ v} (f(v) - f(w))``.

    ``degrees`` overrides the degrees used for normalization and for the
    diagonal. Passing the degree of a parent graph (e.g. 4 on a Kagome
    patch) gives the compression of the parent Laplacian to the vertex set.
    """
    a = graph.adjacency_matrix()
    deg = graph.degrees().astype(float)
    if np.any(deg == 0):
        v = graph.vertices[int(np.flatnonzero(deg == 0)[0])]
        raise GraphError(f"isolated vertex {v!r}: degree zero")
    if degrees is not None:
        deg = np.broadcast_to(np.asarray(degrees, float), deg.shape).copy()
        return np.eye(len(deg)) - a / deg[:, None]
    return np.diag(a.sum(axis=1) / deg) - a / deg[:, None]


def comb_spectrum(graph: CombinatorialGraph, degrees=None) -> np.ndarray:
    """Eigenvalues of :func:`comb_laplacian` via its symmetric form."""
    a = graph.adjacency_matrix()
    deg = graph.degrees().astype(float) if degrees is None else \
        np.broadcast_to(np.asarray(degrees, float), (graph.num_vertices,))
    if np.any(deg == 0):
        raise GraphError("isolated vertex: degree zero")
    d = 1 / np.sqrt(deg)
    diag = np.ones(len(deg)) if degrees is not None else a.sum(axis=1) / deg
    return np.linalg.eigvalsh(np.diag(diag) - d[:, None] * a * d[None, :])


# ---------------------------------------------------------------- hexagons

@dataclass(frozen=True)
class HexagonFunction:
    """``F_H``: values ``(-1)^k`` on the hexagon vertices, zero elsewhere."""

    cell: tuple
    vertices: tuple
    values: tuple
    residual: float


def hexagon_eigenfunction(patch: LatticePatch, cell: Sequence[int]) -> HexagonFunction:
    """The hexagon state of cell ``cell`` and its residual ``||Delta F - 3/2 F||_inf``.

    The residual is evaluated with the Laplacian of the full lattice at
    every patch vertex and at every neighbour of the hexagon.

    Raises
    ------
    GraphError
        If a hexagon vertex does not have its full lattice degree inside
        the patch.
    """
    lat = patch.lattice
    cell = tuple(cell)
    cyc = lat.cell_cycle(0, cell)
    g = patch.subgraph.graph()
    for v in cyc:
        if not g.has_vertex(v) or g.degree(v) != lat.degree(v):
            raise GraphError(f"hexagon of cell {cell} touches the patch boundary at {v!r}")
    f = {v: (-1.0) ** k for k, v in enumerate(cyc)}
    check = set(g.vertices) | {w for v in cyc for _, w in lat.incident_edges(v)}
    res = 0.0
    for v in check:
        nb = lat.incident_edges(v)
        lap = sum(f.get(v, 0.0) - f.get(w, 0.0) for _, w in nb) / len(nb)
        res = max(res, abs(lap - FLAT * f.get(v, 0.0)))
    return HexagonFunction(cell, tuple(cyc), tuple(f[v] for v in cyc), float(res))


def hexagon_matrix(patch: LatticePatch, cells: Iterable) -> np.ndarray:
    """Stacked value vectors (one row per hexagon) over the patch vertices."""
    g = patch.subgraph.graph()
    cells = list(cells)
    m = np.zeros((len(cells), g.num_vertices))
    for i, c in enumerate(cells):
        for k, v in enumerate(patch.lattice.cell_cycle(0, tuple(c))):
            if g.has_vertex(v):
                m[i, g.vertex_index(v)] = (-1.0) ** k
    return m


# ---------------------------------------------------------------- Floquet

def kappa(theta1, theta2):
    """``cos t1 + cos t2 + cos(t1 - t2)``."""
    return np.cos(theta1) + np.cos(theta2) + np.cos(theta1 - theta2)


def floquet_matrix(theta1: float, theta2: float) -> np.ndarray:
    """The 3x3 equivariant Kagome Laplacian in the basis ``(F(a), F(b), F(c))``."""
    e1 = np.exp(1j * theta1)
    e2 = np.exp(1j * theta2)
    m = np.array([
        [4, -1 - np.conj(e2), -np.conj(e1) - np.conj(e2)],
        [-1 - e2, 4, -1 - np.conj(e1)],
        [-e1 - e2, -1 - e1, 4],
    ])
    return m / 4


def bloch_matrix(lattice: PeriodicGraph, theta: Sequence[float]) -> np.ndarray:
    """Equivariant combinatorial Laplacian built from the orbit data.

    Functions satisfy ``F(T_gamma v) = exp(i <theta, gamma>) F(v)``.
    """
    n = len(lattice.vertex_orbits)
    th = np.asarray(theta, float)
    a = np.zeros((n, n), dtype=complex)
    for eo in lattice.edge_orbits:
        ph = np.exp(1j * th @ (np.asarray(eo.head_shift) - np.asarray(eo.tail_shift)))
        a[eo.tail, eo.head] += ph
        a[eo.head, eo.tail] += np.conj(ph)
    deg = np.array([lattice.degree((o, lattice.zero)) for o in range(n)], float)
    return np.eye(n) - a / deg[:, None]


def closed_form_bands(k) -> np.ndarray:
    """Sorted ``(mu_-, mu_+, 3/2)`` for the given ``kappa`` values."""
    k = np.asarray(k, float)
    r = np.sqrt(np.maximum(3 + 2 * k, 0.0)) / 4
    return np.stack([0.75 - r, 0.75 + r, np.full_like(k, FLAT)], axis=-1)


@dataclass(frozen=True)
class FloquetBands:
    """Band functions on a closed ``g x g`` grid of ``[0, 2 pi]^2``.

    ``mu`` has shape ``(g, g, 3)`` with sorted eigenvalues ``(mu_-, mu_+, mu_1)``.
    """

    theta: np.ndarray
    mu: np.ndarray
    kappa: np.ndarray
    closed_form_error: float
    flat_band_error: float

    @property
    def band_minus(self) -> tuple:
        return float(self.mu[..., 0].min()), float(self.mu[..., 0].max())

    @property
    def band_plus(self) -> tuple:
        return float(self.mu[..., 1].min()), float(self.mu[..., 1].max())

    @property
    def flat(self) -> tuple:
        return float(self.mu[..., 2].min()), float(self.mu[..., 2].max())

    def rows(self):
        """``(theta1, theta2, mu_1, mu_-, mu_+)`` records."""
        g = self.theta.size
        for i in range(g):
            for j in range(g):
                m = self.mu[i, j]
                yield (self.theta[i], self.theta[j], m[2], m[0], m[1])


def floquet_bands(g: int, matrix: str = "explicit") -> FloquetBands:
    """Diagonalize the Floquet matrix on ``linspace(0, 2 pi, g)`` squared.

    ``matrix`` selects the explicit 3x3 matrix (``"explicit"``) or the
    one assembled from the lattice orbit data (``"lattice"``). The grid
    contains ``(2 pi/3, 4 pi/3)`` exactly when ``g - 1`` is divisible by 3.
    """
    if g < 3:
        raise ValueError("grid size must be at least 3")
    th = np.linspace(0.0, 2 * np.pi, g)
    t1, t2 = np.meshgrid(th, th, indexing="ij")
    if matrix == "explicit":
        e1 = np.exp(1j * t1)
        e2 = np.exp(1j * t2)
        m = np.zeros((g, g, 3, 3), dtype=complex)
        m[..., 0, 0] = m[..., 1, 1] = m[..., 2, 2] = 4
        m[..., 0, 1] = -1 - np.conj(e2)
        m[..., 0, 2] = -np.conj(e1) - np.conj(e2)
        m[..., 1, 0] = -1 - e2
        m[..., 1, 2] = -1 - np.conj(e1)
        m[..., 2, 0] = -e1 - e2
        m[..., 2, 1] = -1 - e1
        m /= 4
    elif matrix == "lattice":
        lat = kagome_lattice()
        m = np.array([[bloch_matrix(lat, (a, b)) for b in th] for a in th])
    else:
        raise ValueError(f"unknown matrix {matrix!r}")
    mu = np.linalg.eigvalsh(m)
    k = kappa(t1, t2)
    cf = closed_form_bands(k)
    return FloquetBands(th, mu, k, float(np.abs(mu - cf).max()),
                        float(np.abs(mu[..., 2] - FLAT).max()))


# ---------------------------------------------------------------- correspondence

def correspondence_mu(lam):
    """``mu = 1 - cos(sqrt(lam))`` for ``lam >= 0``."""
    lam = np.asarray(lam, float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    out = 1 - np.cos(np.sqrt(lam))
    return float(out) if out.ndim == 0 else out


def correspondence_lambda(mu, branch: int):
    """The preimage of ``mu`` on branch ``k``.

    With ``t = arccos(1 - mu)`` in ``[0, pi]`` the branch-``k`` root is
    ``sqrt(lam) = k pi + t`` for even ``k`` and ``(k + 1) pi - t`` for odd ``k``.
    """
    mu = np.asarray(mu, float)
    if np.any(mu < 0) or np.any(mu > 2):
        raise ValueError("mu must lie in [0, 2]")
    if branch < 0:
        raise ValueError("branch must be nonnegative")
    t = np.arccos(np.clip(1 - mu, -1.0, 1.0))
    root = branch * np.pi + t if branch % 2 == 0 else (branch + 1) * np.pi - t
    out = root ** 2
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- IDS jump

@dataclass(frozen=True)
class CombinatorialJump:
    """Finite-volume jump data for ``Delta_comb`` at ``mu``.

    ``lower = D_n`` and ``upper = D_n + |thick boundary inside the box| / |box|``.
    """

    n: int
    mu: float
    count: int
    size: int
    thick_boundary: int
    lower: float
    upper: float
    note: str = ""

    @property
    def d_n(self) -> float:
        return self.lower

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


def interior_kernel_dimension(n: int, mu: float = FLAT) -> CombinatorialJump:
    """``D_n(mu) = dim E_n(mu) / |Lambda_n|`` on the Kagome box of ``n x n`` cells.

    ``E_n`` consists of the eigenfunctions supported in
    ``Lambda_n minus the unit-thickened boundary``. At ``mu = 3/2`` its
    dimension is the number of hexagons inside that set (hexagon states
    span the finitely supported eigenfunctions and are independent). For
    other ``mu`` there are no finitely supported eigenfunctions.
    """
    lat = kagome_lattice()
    box = combinatorial_box(lat, n)
    size = box.num_vertices
    thick = box.thickened_boundary(1)
    inner = set(box.vertices) - thick
    thick_in = len(thick & set(box.vertices))
    if abs(mu - FLAT) > 1e-12:
        return CombinatorialJump(n, mu, 0, size, thick_in, 0.0, thick_in / size,
                                 "no finitely supported eigenfunctions away from 3/2")
    patch = LatticePatch(lat, (n, n), box, 6 * n * n, ())
    count = len(patch.contained_hexagons(inner))
    return CombinatorialJump(n, mu, count, size, thick_in, count / size,
                             (count + thick_in) / size)


def supported_eigenspace_dimension(lattice: PeriodicGraph, support: Iterable, mu: float,
                                   tol: float = 1e-9) -> int:
    """Numerical dimension of ``{F : Delta F = mu F on the lattice, supp F in support}``.

    Independent check of the hexagon count for small boxes.
    """
    sup = list(dict.fromkeys(support))
    idx = {v: i for i, v in enumerate(sup)}
    rows_v = list(sup)
    seen = set(sup)
    for v in sup:
        for _, w in lattice.incident_edges(v):
            if w not in seen:
                seen.add(w)
                rows_v.append(w)
    a = np.zeros((len(rows_v), len(sup)))
    for r, v in enumerate(rows_v):
        nb = lattice.incident_edges(v)
        d = len(nb)
        if v in idx:
            a[r, idx[v]] += 1.0 - mu
        for _, w in nb:
            if w in idx:
                a[r, idx[w]] -= 1.0 / d
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s < tol * max(1.0, s[0])) + max(0, len(sup) - len(rows_v)))
