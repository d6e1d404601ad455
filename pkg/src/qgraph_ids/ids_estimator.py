"""Integrated density of states: finite-volume curves, exhaustion runs,
localized-trace estimates, jump scans and Wegner experiments."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graph_core import (PeriodicGraph, Subgraph, combinatorial_box, folner_box,
                         subgraph_from_edges)
from .metric_spectra import (OperatorSpec, SolverError, count_below, count_eigenvalues,
                             dirichlet_box, discretize, kernel_dimension,
                             supported_kernel_dimension)
from .random_model import LengthSample, RandomLengthModel, sample


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
               else (os.cpu_count() or 1))


def parallel_map(fn: Callable, items: Sequence, jobs: int | None = None) -> list:
    """``[fn(x) for x in items]``, optionally in worker processes; order kept."""
    items = list(items)
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# ---------------------------------------------------------------- curves

@dataclass(frozen=True)
class IdsCurve:
    """``N(lam)`` on an energy grid.

    ``stderr`` is present for Monte-Carlo estimates. ``provenance`` records
    box size, seeds and solver tags.
    """

    energies: np.ndarray
    values: np.ndarray
    volume: float
    provenance: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None

    def is_monotone(self, slack: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) >= -slack))

    def at(self, lam: float) -> float:
        i = np.flatnonzero(np.isclose(self.energies, lam, rtol=0, atol=1e-12))
        if i.size == 0:
            raise KeyError(f"{lam} is not on the energy grid")
        return float(self.values[i[0]])


def default_grid(u: float, num: int = 400) -> np.ndarray:
    """``num`` uniform points on ``[0, u]`` plus the equilateral Kagome flat-band
    energies ``(2 pi k/3)^2`` and ``(k pi)^2`` below ``u``."""
    base = np.linspace(0.0, u, num)
    k = np.sqrt(u) / np.pi
    extra = [(2 * np.pi * j / 3) ** 2 for j in range(1, int(1.5 * k) + 1)]
    extra += [(np.pi * j) ** 2 for j in range(1, int(k) + 1)]
    extra = [x for x in extra if x <= u]
    return np.unique(np.concatenate([base, extra]))


BOXES = {"folner": folner_box, "induced": combinatorial_box}


def make_box(lattice: PeriodicGraph, n: int, kind: str = "folner") -> Subgraph:
    """``"folner"``: union of translated fundamental edge sets ``Lambda(I_n)``;
    ``"induced"``: subgraph induced on the translated vertex sets."""
    try:
        return BOXES[kind](lattice, n)
    except KeyError:
        raise ValueError(f"unknown box kind {kind!r}; expected one of {sorted(BOXES)}") from None


def box_operator(lattice: PeriodicGraph, n: int, lengths=1.0,
                 kind: str = "folner") -> tuple[Subgraph, OperatorSpec]:
    """Dirichlet box of size ``n``; ``lengths`` is a scalar or a sample."""
    box = make_box(lattice, n, kind)
    if isinstance(lengths, LengthSample):
        lengths = lengths.lengths(box.edges)
    return box, dirichlet_box(box, lengths)


def monotone_counts(count, energies) -> np.ndarray:
    """Evaluate a nondecreasing integer function on ``energies``.

    On sorted input equal values at both ends of a run fill the run, so the
    number of calls scales with the number of jumps rather than grid points.
    """
    e = np.asarray(energies, float)
    if e.size < 3 or np.any(np.diff(e) < 0):
        return np.array([count(x) for x in e], float)
    out = np.full(e.size, np.nan)
    out[0], out[-1] = count(e[0]), count(e[-1])
    stack = [(0, e.size - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        if out[i] == out[j]:
            out[i + 1:j] = out[i]
            continue
        k = (i + j) // 2
        out[k] = count(e[k])
        stack += [(i, k), (k, j)]
    return out


def finite_volume_ids(op: OperatorSpec, energies: Sequence[float],
                      provenance: dict | None = None) -> IdsCurve:
    """``N(lam) = n(H, lam) / vol`` with closed counting."""
    e = np.asarray(energies, float)
    vol = float(op.metric.lengths.sum())
    vals = monotone_counts(lambda x: count_eigenvalues(op, x), e) / vol
    return IdsCurve(e, vals, vol, dict(provenance or {}, solver="inertia-count"))


def sample_ids(lattice: PeriodicGraph, n: int, model: RandomLengthModel, seed: int,
               energies: Sequence[float]) -> IdsCurve:
    s = sample(model, seed, periodic=True)
    _, op = box_operator(lattice, n, s)
    return finite_volume_ids(op, energies, {"n": n, "seed": seed, "lattice": lattice.name})


# ---------------------------------------------------------------- exhaustion

@dataclass(frozen=True)
class ExhaustionTable:
    """Curves for increasing boxes and their distances to the largest one.

    ``bounds[i] = 2 d_max |boundary_i| / vol_i``.
    """

    sizes: tuple
    energies: np.ndarray
    curves: tuple
    distances: np.ndarray
    bounds: np.ndarray

    @property
    def decays(self) -> bool:
        d = self.distances[:-1]
        return bool(np.all(np.diff(d) <= 1e-15))

    @property
    def within_bounds(self) -> bool:
        return bool(np.all(self.distances <= self.bounds + 1e-15))


def _exhaustion_item(args):
    lattice, n, model, seed, energies = args
    return sample_ids(lattice, n, model, seed, energies)


def exhaustion_experiment(lattice: PeriodicGraph, model: RandomLengthModel,
                          sizes: Sequence[int], seed: int, energies: Sequence[float],
                          jobs: int | None = 1) -> ExhaustionTable:
    """``N^{n}_omega`` for one configuration on boxes of increasing size.

    Distances are sup norms over the grid against the largest box.
    """
    sizes = tuple(sorted(int(n) for n in sizes))
    e = np.asarray(energies, float)
    curves = parallel_map(_exhaustion_item, [(lattice, n, model, seed, e) for n in sizes], jobs)
    ref = curves[-1].values
    dist = np.array([float(np.abs(c.values - ref).max()) for c in curves])
    dmax = max(lattice.degree((o, lattice.zero)) for o in range(len(lattice.vertex_orbits)))
    bounds = []
    for n, c in zip(sizes, curves):
        box = folner_box(lattice, n)
        bounds.append(2 * dmax * len(box.boundary) / c.volume)
    return ExhaustionTable(sizes, e, tuple(curves), dist, np.array(bounds))


# ---------------------------------------------------------------- localized trace

def edge_masses(disc, vecs: np.ndarray, edges: Sequence[int]) -> np.ndarray:
    """Lumped ``int_e |psi|^2`` summed over the given edge indices, per vector."""
    out = np.zeros(vecs.shape[1])
    for e in edges:
        nodes = np.asarray(disc.edge_nodes[e])
        h = disc.edge_h[e]
        vals = np.where(nodes[:, None] >= 0, vecs[np.maximum(nodes, 0)], 0.0)
        sq = np.abs(vals) ** 2
        out += h * (sq[1:-1].sum(axis=0) + 0.5 * (sq[0] + sq[-1]))
    return out


def _localized_item(args):
    lattice, n, model, seed, energies, mesh, cell = args
    s = sample(model, seed, periodic=True)
    box, op = box_operator(lattice, n, s)
    disc = discretize(op, mesh)
    w, v = disc.solve(upper=float(np.max(energies)), vectors=True)
    idx = [op.graph.edge_index((j, cell)) for j in range(len(lattice.edge_orbits))]
    mass = edge_masses(disc, v, idx)
    trace = np.array([mass[w <= x].sum() for x in energies])
    vol_f = float(op.metric.lengths[idx].sum())
    return trace, vol_f


def center_cell(lattice: PeriodicGraph, n: int) -> tuple:
    """Central cell of the box; it must lie at least ``n/4`` cells from the box edge."""
    c = n // 2
    if min(c, n - 1 - c) < n / 4:
        raise SolverError(f"box n={n} is too small to buffer a fundamental domain by n/4 cells")
    return (c,) * lattice.rank


def abstract_ids_mc(lattice: PeriodicGraph, model: RandomLengthModel,
                    energies: Sequence[float], samples: int, n: int, seed: int = 0,
                    mesh: float = 16, jobs: int | None = 1) -> IdsCurve:
    """Localized-trace estimate of ``E tr(1_F P((-inf, lam])) / E vol(F)``.

    Each sample uses the discretized Dirichlet box of size ``n`` and the
    fundamental domain of its central cell. ``stderr`` is the standard error
    of the trace divided by the mean volume.
    """
    e = np.asarray(energies, float)
    cell = center_cell(lattice, n)
    items = [(lattice, n, model, seed + i, e, mesh, cell) for i in range(samples)]
    res = parallel_map(_localized_item, items, jobs)
    traces = np.array([r[0] for r in res])
    vols = np.array([r[1] for r in res])
    mv = vols.mean()
    se = traces.std(axis=0, ddof=1) / math.sqrt(samples) / mv if samples > 1 else np.zeros(e.size)
    return IdsCurve(e, traces.mean(axis=0) / mv, mv,
                    {"n": n, "samples": samples, "seed": seed, "mesh": mesh,
                     "solver": "fd-lumped", "cell": cell}, se)


# ---------------------------------------------------------------- jumps

@dataclass(frozen=True)
class MetricJump:
    """Jump data of the equilateral Kirchhoff Laplacian at ``lam``.

    ``dirichlet_multiplicity`` is the kernel dimension on the Dirichlet box;
    ``interior_dimension`` that of eigenfunctions supported away from the
    boundary. The interval is ``[interior/vol, (interior + boundary_data)/vol]``.
    """

    n: int
    lam: float
    volume: float
    dirichlet_multiplicity: int
    interior_dimension: int
    boundary_data: int
    interior_edges: int
    interior_vertices: int

    @property
    def estimate(self) -> float:
        return self.dirichlet_multiplicity / self.volume

    @property
    def lower(self) -> float:
        return self.interior_dimension / self.volume

    @property
    def upper(self) -> float:
        return (self.interior_dimension + self.boundary_data) / self.volume

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    @property
    def topological_count(self) -> int:
        """``|E| - |V|`` of the interior part."""
        return self.interior_edges - self.interior_vertices


def metric_jump(lattice: PeriodicGraph, n: int, lam: float, tol: float = 1e-7) -> MetricJump:
    """Kernel-dimension counts on the equilateral box ``Lambda(I_n)`` at ``lam``.

    The interior part consists of the edges not touching the boundary;
    eigenfunctions supported there vanish at its outer vertices and have
    zero derivative sum there. The boundary data term is
    ``sum_{v in boundary} (1 + deg_Lambda v)``, the dimension of the values
    and derivatives that fix an eigenfunction near the boundary.
    """
    box = folner_box(lattice, n)
    op = dirichlet_box(box)
    mdir = kernel_dimension(op, lam, tol)
    inner = subgraph_from_edges(lattice, box.interior_edges())
    if inner.num_edges:
        dim_in = supported_kernel_dimension(inner.metric(1.0), lam, inner.boundary, tol)
    else:
        dim_in = 0
    g = box.graph()
    bdata = sum(1 + g.degree(v) for v in box.boundary)
    return MetricJump(n, float(lam), float(box.num_edges), mdir, dim_in, bdata,
                      inner.num_edges, inner.num_vertices)


@dataclass(frozen=True)
class JumpScan:
    """Increments ``N(lam + eps) - N(lam - eps)`` for decreasing ``eps``.

    ``limit`` is the intercept of a least-squares line through the
    increments; ``slope`` its slope in ``eps``.
    """

    lam: float
    eps: np.ndarray
    increments: np.ndarray
    stderr: np.ndarray
    limit: float
    slope: float
    interval: tuple | None = None


def jump_scan(curve: Callable[[float], float], lam: float, eps: Sequence[float],
              resolution: float = 1e-10, interval: tuple | None = None,
              stderr: Callable[[float], float] | None = None) -> JumpScan:
    """Scan the jump of ``curve`` at ``lam``.

    ``curve(x)`` returns ``N(x)`` (closed counting). ``eps`` must decrease
    and stay above the solver resolution ``resolution * max(1, lam)``.
    """
    eps = np.asarray(eps, float)
    if lam <= 0:
        raise ValueError("jump energy must be positive")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps must be strictly decreasing")
    res = resolution * max(1.0, abs(lam))
    if eps.min() <= 10 * res:
        raise SolverError(f"eps={eps.min():g} is below the solver energy resolution {res:g}")
    inc = np.array([curve(lam + x) - curve(lam - x) for x in eps])
    se = np.array([stderr(x) for x in eps]) if stderr else np.zeros(eps.size)
    if eps.size >= 2:
        slope, limit = np.polyfit(eps, inc, 1)
    else:
        slope, limit = 0.0, float(inc[0])
    return JumpScan(float(lam), eps, inc, se, float(limit), float(slope), interval)


def box_counting_curve(op: OperatorSpec) -> Callable[[float], float]:
    vol = float(op.metric.lengths.sum())
    return lambda x: count_eigenvalues(op, x) / vol


def _increment_item(args):
    lattice, n, model, seed, lam, eps = args
    s = sample(model, seed, periodic=True)
    _, op = box_operator(lattice, n, s)
    vol = float(op.metric.lengths.sum())
    return np.array([(count_eigenvalues(op, lam + x) - count_eigenvalues(op, lam - x)) / vol
                     for x in eps])


def random_jump_scan(lattice: PeriodicGraph, n: int, model: RandomLengthModel, lam: float,
                     eps: Sequence[float], samples: int, seed: int = 0,
                     jobs: int | None = 1) -> JumpScan:
    """Sample-averaged increments of ``N^n_omega`` around ``lam``."""
    eps = np.asarray(eps, float)
    items = [(lattice, n, model, seed + i, lam, eps) for i in range(samples)]
    incs = np.array(parallel_map(_increment_item, items, jobs))
    mean = incs.mean(axis=0)
    se = incs.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.zeros(eps.size)
    slope, limit = np.polyfit(eps, mean, 1) if eps.size >= 2 else (0.0, float(mean[0]))
    return JumpScan(float(lam), eps, mean, se, float(limit), float(slope))


def lipschitz_check(scan: JumpScan, probe: float, fit_eps: Sequence[float],
                    z: float = 2.0) -> dict:
    """Compare the increment at ``probe`` with the Lipschitz line fitted on ``fit_eps``.

    The line is ``2 L eps`` with ``L = max inc(eps)/(2 eps)`` over ``fit_eps``.
    The probe passes if it lies below the line plus ``z`` standard errors.
    """
    idx = {float(e): i for i, e in enumerate(scan.eps)}
    lip = max(scan.increments[idx[float(e)]] / (2 * e) for e in fit_eps)
    i = idx[float(probe)]
    line = 2 * lip * probe
    return {"lipschitz": float(lip), "line": float(line),
            "increment": float(scan.increments[i]), "stderr": float(scan.stderr[i]),
            "below": bool(scan.increments[i] <= line + z * scan.stderr[i])}


# ---------------------------------------------------------------- Wegner

@dataclass(frozen=True)
class WegnerReport:
    """Monte-Carlo estimates of ``E tr P(I)`` for ``I = [c - w/2, c + w/2]``.

    ``constants = mean / (w |E|)``. ``growth`` is the fitted exponent ``p``
    in ``C(w) ~ w^-p``: near 0 for bounded constants, near 1 for a jump.
    """

    u: float
    centers: np.ndarray
    widths: np.ndarray
    samples: int
    num_edges: int
    mean: np.ndarray
    stderr: np.ndarray
    constants: np.ndarray
    growth: float

    @property
    def spread(self) -> float:
        c = self.constants[np.isfinite(self.constants)]
        if c.size == 0 or c.min() <= 0:
            return math.inf
        return float(c.max() / c.min())

    def rows(self):
        for (i, j), m in np.ndenumerate(self.mean):
            yield (self.centers[i], self.widths[j], m, self.stderr[i, j], self.constants[i, j])


def _wegner_item(args):
    lattice, n, model, seed, lo, hi, kind = args
    s = sample(model, seed, periodic=True)
    _, op = box_operator(lattice, n, s, kind)
    # tr P([a, b]) = n(b) - #(eigenvalues < a)
    return np.array([count_eigenvalues(op, b) - count_below(op, a) for a, b in zip(lo, hi)])


def wegner_experiment(lattice: PeriodicGraph, n: int, model: RandomLengthModel, u: float,
                      widths: Sequence[float], centers: Sequence[float], samples: int,
                      seed: int = 0, jobs: int | None = 1, box: str = "folner") -> WegnerReport:
    """Estimate ``E tr P(I)`` on the Dirichlet box for every center and width.

    A deterministic model is evaluated once (zero variance).

    Raises
    ------
    ValueError
        If an interval leaves ``J_u = [1/u, u]``.
    """
    widths = np.asarray(widths, float)
    centers = np.asarray(centers, float)
    cc, ww = np.meshgrid(centers, widths, indexing="ij")
    lo, hi = (cc - ww / 2).ravel(), (cc + ww / 2).ravel()
    if lo.min() < 1 / u or hi.max() > u:
        raise ValueError(f"intervals must lie in J_u = [{1 / u:g}, {u:g}]")
    nedges = make_box(lattice, n, box).num_edges
    items = [(lattice, n, model, seed + i, lo, hi, box) for i in range(samples)]
    if model.deterministic:
        items = items[:1]
    tr = np.array(parallel_map(_wegner_item, items, jobs), float)
    mean = tr.mean(axis=0).reshape(cc.shape)
    if tr.shape[0] > 1:
        se = (tr.std(axis=0, ddof=1) / math.sqrt(tr.shape[0])).reshape(cc.shape)
    else:
        se = np.zeros(cc.shape)
    const = mean / (ww * nedges)
    logc = np.log(np.where(const > 0, const, np.nan)).mean(axis=0)
    ok = np.isfinite(logc)
    growth = float(-np.polyfit(np.log(widths[ok]), logc[ok], 1)[0]) if ok.sum() >= 2 else math.nan
    return WegnerReport(float(u), centers, widths, len(items), nedges, mean, se, const, growth)


# ---------------------------------------------------------------- regular graphs and contrast

def regular_jump(r: int) -> float:
    """Jump ``1 - 2/r`` of the equilateral Kirchhoff IDS at ``pi^2`` on an
    ``r``-regular lattice: the limit of ``(|E| - |V|)/|E|`` with ``|E| = r|V|/2``."""
    if r < 2:
        raise ValueError("degree must be at least 2")
    return 1.0 - 2.0 / r


@dataclass(frozen=True)
class ContrastReport:
    """Periodic jump against random-model increments at one energy."""

    lam: float
    periodic: JumpScan
    periodic_n: int
    random: JumpScan
    check: dict
    threshold: float

    @property
    def periodic_exceeds(self) -> bool:
        return self.periodic.limit > self.threshold

    @property
    def holds(self) -> bool:
        return self.periodic_exceeds and self.check["below"]


def contrast_experiment(lattice: PeriodicGraph, model: RandomLengthModel, lam: float,
                        eps: Sequence[float], probe: float, periodic_n: int, random_n: int,
                        samples: int, seed: int = 0, threshold: float = 0.1,
                        jobs: int | None = 1) -> ContrastReport:
    """Jump scan on the equilateral box against sample-averaged random increments.

    ``probe`` must be the smallest entry of ``eps``; the Lipschitz line is
    fitted on the others.
    """
    eps = np.asarray(eps, float)
    if float(probe) != float(eps.min()):
        raise ValueError("probe must be the smallest eps")
    _, op = box_operator(lattice, periodic_n)
    per = jump_scan(box_counting_curve(op), lam, eps)
    rnd = random_jump_scan(lattice, random_n, model, lam, eps, samples, seed, jobs)
    chk = lipschitz_check(rnd, probe, [e for e in eps if e != probe])
    return ContrastReport(float(lam), per, periodic_n, rnd, chk, threshold)
