import math
import pickle

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from qgraph_ids.graph_core import folner_box, kagome_lattice
from qgraph_ids.random_model import (ModelError, RandomLengthModel, act, deterministic_model,
                                     draws, edge_uniform, log_transform, make_density,
                                     model_from_config, sample)


@pytest.fixture
def bump():
    return make_density(0.5, 1.5)


def test_cos2_bump_closed_form(bump):
    x = np.linspace(0.5, 1.5, 11)
    assert np.allclose(bump.pdf(x), 2 * np.cos(np.pi * (x - 1)) ** 2)
    assert quad(lambda t: float(bump.pdf(t)), 0.5, 1.5, epsabs=1e-14)[0] == pytest.approx(1, abs=1e-12)
    assert bump.pdf(0.5) == pytest.approx(0, abs=1e-15) and bump.pdf(1.5) == pytest.approx(0, abs=1e-15)
    assert bump.dpdf(0.5) == pytest.approx(0, abs=1e-14) and bump.dpdf(1.5) == pytest.approx(0, abs=1e-14)
    assert bump.pdf(0.2) == 0 and bump.pdf(2.0) == 0


@pytest.mark.parametrize("lo,hi", [(0.5, 1.5), (0.8, 1.25), (1.0, 3.0)])
def test_sup_norms(lo, hi):
    for fam in ("cos2", "poly"):
        d = make_density(lo, hi, fam)
        x = np.linspace(lo, hi, 200001)
        assert np.abs(d.pdf(x)).max() == pytest.approx(d.sup_h, rel=1e-6)
        assert np.abs(d.dpdf(x)).max() == pytest.approx(d.sup_dh, rel=1e-6)
        assert quad(lambda t: float(d.pdf(t)), lo, hi, epsabs=1e-14)[0] == pytest.approx(1, abs=1e-12)
    assert make_density(lo, hi).sup_h == pytest.approx(2 / (hi - lo))


def test_uniform_and_bad_bounds_rejected():
    with pytest.raises(ModelError, match="C\\^1"):
        make_density(0.5, 1.5, "uniform")
    with pytest.raises(ModelError):
        make_density(1.5, 0.5)
    with pytest.raises(ModelError):
        make_density(0.0, 1.0)


def test_sampling_determinism_and_support(bump):
    m = RandomLengthModel(bump)
    edges = folner_box(kagome_lattice(), 3).edges
    a = sample(m, 11, periodic=True).lengths(edges)
    b = sample(m, 11, periodic=True).lengths(edges)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample(m, 12, periodic=True).lengths(edges))
    assert a.min() >= 0.5 and a.max() <= 1.5
    assert len(set(a.tolist())) == len(a)


def test_lengths_are_subgraph_stable(bump):
    s = sample(RandomLengthModel(bump), 3, periodic=True)
    big = folner_box(kagome_lattice(), 4)
    small = folner_box(kagome_lattice(), 2)
    full = s.materialize(big.edges)
    assert all(full[e] == s.length(e) for e in small.edges)
    assert s.length((0, (1, 1))) == s.length((np.int64(0), (np.int64(1), 1)))


def test_draw_statistics(bump):
    x = draws(RandomLengthModel(bump), 10_000, seed=5)
    assert x.min() >= 0.5 and x.max() <= 1.5
    se = math.sqrt(bump.variance() / x.size)
    assert abs(x.mean() - bump.mean()) <= 3 * se
    assert bump.mean() == pytest.approx(1.0, abs=1e-12)
    ks = stats.kstest(x, lambda t: bump.cdf(t))
    assert ks.statistic < 1.63 / math.sqrt(x.size)


def test_edge_uniform_keyed():
    assert edge_uniform(1, (0, (2, 3))) == edge_uniform(1, (0, (2, 3)))
    assert edge_uniform(1, (0, (2, 3))) != edge_uniform(1, (0, (3, 2)))
    u = np.array([edge_uniform(9, (j, (i, 0))) for j in range(6) for i in range(500)])
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_log_transform(bump):
    lc = log_transform(bump)
    assert lc.omega_minus == math.log(0.5) and lc.omega_plus == math.log(1.5)
    assert lc.integral == pytest.approx(1, abs=1e-10)
    assert lc.d_h == pytest.approx((1.5 + 2.25) * bump.c_h)
    assert lc.within_bound and lc.sup_dg <= (1.5 + 2.25) * bump.c_h
    x = draws(RandomLengthModel(bump), 50, 1)
    assert np.allclose(log_transform(bump, x).alphas, np.log(x))


def test_group_action(bump):
    m = RandomLengthModel(bump)
    s = sample(m, 4, periodic=True)
    edges = folner_box(kagome_lattice(), 3).edges
    assert np.array_equal(act((0, 0), s).lengths(edges), s.lengths(edges))
    t = act((1, 0), s)
    for j, d in edges:
        assert t.length((j, d)) == s.length((j, (d[0] + 1, d[1])))
    lhs = act((2, -1), act((-1, 3), s)).lengths(edges)
    assert np.array_equal(lhs, act((1, 2), s).lengths(edges))
    with pytest.raises(ModelError):
        act((1, 0), sample(m, 4))


def test_models_from_config_and_pickle(bump):
    assert model_from_config({"l_min": 1, "l_max": 1}).deterministic
    m = model_from_config({"l_min": 0.8, "l_max": 1.25, "family": "poly"})
    assert m.l_min == 0.8 and m.l_max == 1.25 and m.c_h == m.default.c_h
    assert deterministic_model(2.0).c_h == 0
    d = pickle.loads(pickle.dumps(bump))
    assert d.family == "cos2" and d.quantile(0.3) == bump.quantile(0.3)
    with pytest.raises(ModelError):
        RandomLengthModel()
