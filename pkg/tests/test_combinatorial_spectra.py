import math

import networkx as nx
import numpy as np
import pytest

from qgraph_ids.combinatorial_spectra import (FLAT, bloch_matrix, comb_laplacian, comb_spectrum,
                                              correspondence_lambda, correspondence_mu,
                                              floquet_bands, floquet_matrix, hexagon_eigenfunction,
                                              hexagon_matrix, interior_kernel_dimension, kappa,
                                              supported_eigenspace_dimension)
from qgraph_ids.graph_core import (GraphError, build_topological_graph, combinatorial_box,
                                   kagome_lattice, kagome_patch)

from conftest import random_connected_graph


def test_small_laplacians():
    e = build_topological_graph([0, 1], [(0, 0, 1)])
    assert np.allclose(comb_spectrum(e), [0, 2])
    tri = build_topological_graph([0, 1, 2], [(0, 0, 1), (1, 1, 2), (2, 2, 0)])
    assert np.allclose(np.sort(np.linalg.eigvals(comb_laplacian(tri)).real), [0, 1.5, 1.5])
    with pytest.raises(GraphError):
        comb_laplacian(build_topological_graph([0, 1, 2], [(0, 0, 1)]))


def test_random_graph_spectra_in_unit_interval_twice(rng):
    for _ in range(20):
        g = random_connected_graph(rng, 10, loops=True)
        ev = comb_spectrum(g)
        assert ev.min() > -1e-12 and ev.max() < 2 + 1e-12
        assert np.allclose(comb_laplacian(g) @ np.ones(g.num_vertices), 0)


def test_kagome_patch_compression_in_band_range():
    g = kagome_patch(4, 4).subgraph.graph()
    ev = comb_spectrum(g, degrees=4)
    assert ev.min() >= -1e-12 and ev.max() <= FLAT + 1e-12


def test_hexagon_states():
    patch = kagome_patch(4, 4)
    inner = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 0), (0, 1)]
    for c in [(1, 1), (2, 1), (1, 2)]:
        h = hexagon_eigenfunction(patch, c)
        assert h.residual < 1e-14
        assert h.values == (1, -1, 1, -1, 1, -1)
    for k in range(1, 7):
        assert np.linalg.matrix_rank(hexagon_matrix(patch, inner[:k])) == k
    with pytest.raises(GraphError):
        hexagon_eigenfunction(patch, (3, 3))


def test_hexagons_are_the_chordless_six_cycles():
    patch = kagome_patch(5, 5)
    g = patch.subgraph.graph()
    G = nx.Graph()
    G.add_edges_from(zip((g.vertices[i] for i in g.tail_index),
                         (g.vertices[i] for i in g.head_index)))
    six = {frozenset(c) for c in nx.chordless_cycles(G) if len(c) == 6}
    ours = {frozenset(cyc) for _, cyc in patch.contained_hexagons()}
    assert six == ours and len(ours) == 16


def test_floquet_special_points():
    assert kappa(0, 0) == 3
    assert np.allclose(np.linalg.eigvalsh(floquet_matrix(0, 0)), [0, 1.5, 1.5])
    k = kappa(2 * math.pi / 3, 4 * math.pi / 3)
    assert k == pytest.approx(-1.5)
    assert np.allclose(np.linalg.eigvalsh(floquet_matrix(2 * math.pi / 3, 4 * math.pi / 3)),
                       [0.75, 0.75, 1.5])


def test_floquet_grid_64():
    fb = floquet_bands(64)
    assert fb.closed_form_error <= 1e-12 and fb.flat_band_error <= 1e-12
    assert np.allclose(fb.band_minus, (0, 0.75), atol=1e-10)
    assert np.allclose(fb.band_plus, (0.75, 1.5), atol=1e-10)
    lat = floquet_bands(16, matrix="lattice")
    assert lat.closed_form_error <= 1e-12


def test_bloch_matrix_is_conjugate_of_explicit():
    lat = kagome_lattice()
    for th in [(0.3, 1.1), (2.0, -0.7), (math.pi, 0.5)]:
        a = np.linalg.eigvalsh(bloch_matrix(lat, th))
        b = np.linalg.eigvalsh(floquet_matrix(*th))
        assert np.allclose(a, b, atol=1e-13)


def test_band_edge_grid_convergence():
    # grids with g - 1 divisible by 3 hit the touching point exactly
    for g in (4, 7, 64):
        assert abs(floquet_bands(g).band_minus[1] - 0.75) < 1e-12
    # other grids approach 3/4 at first order in the grid step
    errs = {g: abs(floquet_bands(g).band_minus[1] - 0.75) for g in (33, 65, 129)}
    assert errs[33] > errs[65] > errs[129]
    assert 1.5 < errs[33] / errs[65] < 2.5


def test_correspondence():
    assert correspondence_mu((2 * math.pi / 3) ** 2) == pytest.approx(1.5, abs=1e-15)
    assert correspondence_mu(0.0) == 0
    lam = correspondence_lambda(0.75, 0)
    assert lam == pytest.approx(math.acos(0.25) ** 2, rel=1e-14)
    assert lam == pytest.approx(1.7374300, abs=1e-6)
    assert correspondence_mu(lam) == pytest.approx(0.75, abs=1e-12)
    for mu in np.linspace(0, 2, 41):
        for k in range(6):
            assert abs(correspondence_mu(correspondence_lambda(mu, k)) - mu) <= 1e-12


def test_interior_kernel_dimension():
    assert interior_kernel_dimension(1).count == 0 and interior_kernel_dimension(1).d_n == 0
    j4 = interior_kernel_dimension(4)
    assert j4.size == 48 and j4.count == 1 and j4.contains(1 / 3)
    res = [interior_kernel_dimension(n) for n in (4, 8, 16, 32)]
    d = [r.d_n for r in res]
    assert d == sorted(d) and all(x <= 1 / 3 for x in d)
    j32 = res[-1]
    assert abs(j32.d_n - 1 / 3) <= j32.thick_boundary / j32.size <= 0.15
    assert j32.width < res[-2].width


def test_hexagon_count_matches_numeric_kernel():
    lat = kagome_lattice()
    for n in (4, 6):
        box = combinatorial_box(lat, n)
        inner = set(box.vertices) - box.thickened_boundary(1)
        assert supported_eigenspace_dimension(lat, inner, FLAT) == interior_kernel_dimension(n).count


def test_off_flat_energy_has_no_interior_states():
    j = interior_kernel_dimension(8, mu=0.75)
    assert j.count == 0 and j.lower == 0
