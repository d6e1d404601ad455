import math

import numpy as np
import pytest

from qgraph_ids.graph_core import (build_topological_graph, chain_lattice, folner_box,
                                   kagome_lattice, metric_graph, subgraph_from_edges)
from qgraph_ids.ids_estimator import (_localized_item, abstract_ids_mc, box_counting_curve,
                                      box_operator, center_cell, contrast_experiment,
                                      default_grid, exhaustion_experiment, finite_volume_ids,
                                      jump_scan, make_box, metric_jump, parallel_map,
                                      regular_jump, sample_ids, wegner_experiment)
from qgraph_ids.metric_spectra import (SolverError, count_eigenvalues, decouple, dirichlet_box,
                                       make_operator)
from qgraph_ids.random_model import RandomLengthModel, deterministic_model, make_density

K_FLAT2 = (2 * math.pi / 3) ** 2
PI2 = math.pi ** 2


@pytest.fixture(scope="module")
def kagome():
    return kagome_lattice()


@pytest.fixture(scope="module")
def bump_model():
    return RandomLengthModel(make_density(0.8, 1.25))


def test_single_edge_curve():
    g = build_topological_graph([0, 1], [("e", 0, 1)])
    op = make_operator(metric_graph(g, 1.0), "dirichlet")
    c = finite_volume_ids(op, [-1.0, 50.0])
    assert c.at(50.0) == 2 and c.at(-1.0) == 0


def test_chain_approaches_line_ids():
    lat = chain_lattice()
    e = np.linspace(1, 30, 300)
    errs = []
    for n in (20, 80):
        _, op = box_operator(lat, n)
        c = finite_volume_ids(op, e)
        errs.append(np.abs(c.values - np.sqrt(e) / np.pi).max())
        assert errs[-1] <= 1 / n + 1e-12
        assert c.is_monotone()
    assert errs[1] < errs[0]


def test_kagome_box_flat_between_bands(kagome):
    _, op = box_operator(kagome, 4)
    for a, b in [(K_FLAT2, PI2), (PI2, (4 * math.pi / 3) ** 2)]:
        grid = np.linspace(a, b, 12)[1:-1]
        c = finite_volume_ids(op, grid)
        assert np.ptp(c.values) == 0


def test_normalization_consistency(kagome):
    box = folner_box(kagome, 3)
    op = dirichlet_box(box)
    half = [e for e in box.edges if e[1][0] == 0]
    rest = [e for e in box.edges if e[1][0] != 0]
    union = decouple(op, half).dirichlet
    pieces = [dirichlet_box(subgraph_from_edges(kagome, p)) for p in (half, rest)]
    grid = np.linspace(0.5, 40, 25)
    u = finite_volume_ids(union, grid)
    parts = [finite_volume_ids(p, grid) for p in pieces]
    avg = sum(p.values * p.volume for p in parts) / sum(p.volume for p in parts)
    assert np.allclose(u.values, avg, rtol=0, atol=1e-14)


def test_boundary_effect_bound(kagome):
    box = folner_box(kagome, 3)
    op = dirichlet_box(box)
    d = decouple(op, [e for e in box.edges if e[1][1] == 0])
    bound = 2 * sum(op.graph.degree(v) for v in d.interface)
    for x in np.linspace(0, 50, 26):
        assert abs(count_eigenvalues(op, x) - count_eigenvalues(d.dirichlet, x)) <= bound


def test_exhaustion_chain_boundary_effect():
    lat = chain_lattice()
    for n in (5, 10, 40, 160):
        _, op = box_operator(lat, n)
        assert abs(count_eigenvalues(op, 10.0) / n - math.sqrt(10) / math.pi) <= 2 / n


def test_exhaustion_kagome_periodic(kagome):
    tab = exhaustion_experiment(kagome, deterministic_model(), [2, 4, 8], 0, [2.0, 6.0, 14.0])
    assert tab.decays and tab.within_bounds
    d = tab.distances
    ratios = [folner_box(kagome, n).van_hove_ratio() for n in (2, 4)]
    assert d[0] <= 2 * 4 * ratios[0] and d[1] <= 2 * 4 * ratios[1]


def test_self_averaging(kagome, bump_model):
    e = np.linspace(0.5, 30, 30)
    dist = []
    for n in (2, 5):
        a = sample_ids(kagome, n, bump_model, 1, e).values
        b = sample_ids(kagome, n, bump_model, 2, e).values
        assert not np.array_equal(a, b)
        dist.append(np.abs(a - b).mean())
    assert dist[1] < dist[0]


def test_localized_trace_single_sample_and_weyl(kagome):
    e = np.array([2.0, 3.0, 20.0, 60.0])
    c = abstract_ids_mc(kagome, deterministic_model(), e, 1, 4, mesh=12)
    trace, vol = _localized_item((kagome, 4, deterministic_model(), 0, e, 12, center_cell(kagome, 4)))
    assert np.array_equal(c.values, trace / vol)
    assert np.array_equal(c.stderr, np.zeros(4))
    # plateau agreement with the box curve, and the Weyl bound per fundamental domain
    _, op = box_operator(kagome, 4)
    fv = finite_volume_ids(op, e)
    bound = 2 * 29 * 4 / 96
    assert np.all(np.abs(c.values - fv.values) <= bound)
    assert np.all(np.abs(c.values - np.sqrt(e) / np.pi) <= 2 * 12 / 6)


def test_localized_trace_needs_buffer(kagome):
    with pytest.raises(SolverError, match="buffer"):
        abstract_ids_mc(kagome, deterministic_model(), [1.0], 1, 2)


def test_localized_trace_random_stderr(kagome, bump_model):
    c = abstract_ids_mc(kagome, bump_model, [5.0, 20.0], 4, 4, mesh=8)
    assert np.all(c.stderr > 0) and c.is_monotone()


def test_wegner_deterministic_exact(kagome):
    rep = wegner_experiment(kagome, 3, deterministic_model(), 30, [0.4, 0.05], [K_FLAT2], 7,
                            box="induced")
    assert rep.samples == 1 and np.all(rep.stderr == 0)
    assert np.array_equal(rep.mean, [[1.0, 1.0]])
    assert rep.constants[0, 1] / rep.constants[0, 0] == pytest.approx(8.0)
    with pytest.raises(ValueError, match="J_u"):
        wegner_experiment(kagome, 3, deterministic_model(), 4, [0.4], [K_FLAT2], 1)


def test_wegner_folner_box_has_extra_level(kagome):
    # a dispersive level at 4.216 falls in the widest window of the Folner 3x3 box
    rep = wegner_experiment(kagome, 3, deterministic_model(), 30, [0.4, 0.05], [K_FLAT2], 1)
    assert np.array_equal(rep.mean, [[2.0, 1.0]])


def test_wegner_random_bounded(kagome, bump_model):
    rep = wegner_experiment(kagome, 3, bump_model, 30, [0.4, 0.2, 0.1, 0.05], [K_FLAT2], 60,
                            seed=3, box="induced")
    assert rep.num_edges == make_box(kagome, 3, "induced").num_edges == 43
    assert np.all(np.isfinite(rep.constants)) and rep.spread < 3


def test_metric_jumps_n4(kagome):
    six = metric_jump(kagome, 4, K_FLAT2)
    assert six.dirichlet_multiplicity == 4 and six.volume == 96
    assert six.contains(1 / 6) and six.contains(six.estimate)
    half = metric_jump(kagome, 4, PI2)
    assert half.contains(0.5) and half.contains(half.estimate)
    assert half.interior_dimension == half.topological_count == 18


def test_jump_interval_shrinks(kagome):
    w = [metric_jump(kagome, n, K_FLAT2) for n in (4, 8)]
    assert w[1].upper - w[1].lower < w[0].upper - w[0].lower
    assert all(j.contains(1 / 6) for j in w)


def test_jump_scan_guards(kagome):
    _, op = box_operator(kagome, 3)
    curve = box_counting_curve(op)
    with pytest.raises(SolverError, match="resolution"):
        jump_scan(curve, K_FLAT2, [0.1, 1e-12])
    with pytest.raises(ValueError):
        jump_scan(curve, K_FLAT2, [0.1, 0.2])
    with pytest.raises(ValueError):
        jump_scan(curve, -1.0, [0.1])


def test_periodic_jump_scan_n4(kagome):
    _, op = box_operator(kagome, 4)
    scan = jump_scan(box_counting_curve(op), K_FLAT2, [0.3, 0.1, 0.03, 0.01])
    assert np.all(np.diff(scan.increments) <= 0)
    assert scan.increments[-1] == pytest.approx(4 / 96)


def test_contrast_property(kagome, bump_model):
    rep = contrast_experiment(kagome, bump_model, K_FLAT2, [0.4, 0.2, 0.1, 0.05], 0.05,
                              periodic_n=10, random_n=4, samples=40, seed=0)
    assert rep.periodic.limit > 0.1
    assert rep.check["below"] and rep.holds


def test_regular_jump_and_topological_count(kagome):
    assert regular_jump(4) == 0.5 and regular_jump(3) == pytest.approx(1 / 3)
    box = folner_box(kagome, 24)
    assert (box.num_edges - box.num_vertices) / box.num_edges == pytest.approx(0.5, abs=0.05)
    with pytest.raises(ValueError):
        regular_jump(1)


def test_default_grid_and_parallel_map():
    g = default_grid(40.0)
    assert g[0] == 0 and g[-1] == 40.0 and np.all(np.diff(g) > 0)
    assert np.any(np.isclose(g, K_FLAT2)) and np.any(np.isclose(g, PI2))
    assert parallel_map(abs, [-3, 2, -1], jobs=2) == [3, 2, 1]
