import numpy as np
import pytest

from qgraph_ids.graph_core import build_topological_graph
from qgraph_ids.vertex_conditions import (ConditionError, assign, delta, dirichlet, general,
                                          kirchhoff, neumann, neumann_type, parse_condition,
                                          validate)


def test_kirchhoff_small_cases():
    k1 = kirchhoff(1)
    assert np.array_equal(k1.Q, [[1.0]]) and np.array_equal(k1.R, [[0.0]])
    k4 = kirchhoff(4)
    assert np.allclose(k4.Q, 0.25) and np.trace(k4.Q) == pytest.approx(1.0)
    assert kirchhoff(3).satisfied_by([1, 1, 1], [1, -2, 1])
    assert not kirchhoff(3).satisfied_by([1, 1, 1], [1, 1, 1])
    assert not kirchhoff(3).satisfied_by([1, 0, 1], [0, 0, 0])


def test_dirichlet_neumann_delta():
    d = dirichlet(2)
    assert np.array_equal(d.Q, np.zeros((2, 2)))
    assert d.satisfied_by([0, 0], [3, -1]) and not d.satisfied_by([1, 0], [0, 0])
    n = neumann(3)
    assert np.array_equal(n.Q, np.eye(3)) and np.array_equal(n.R, np.zeros((3, 3)))
    assert n.satisfied_by([1, 2, 3], [0, 0, 0]) and not n.satisfied_by([1, 2, 3], [1, 0, 0])
    for deg in (1, 2, 5):
        assert np.array_equal(delta(deg, 0).Q, kirchhoff(deg).Q)
        assert np.array_equal(delta(deg, 0).R, kirchhoff(deg).R)
    assert neumann_type(2, 0).kind == "neumann"


@pytest.mark.parametrize("cond", [kirchhoff(3), delta(4, -2.5), dirichlet(2), neumann(3),
                                  neumann_type(2, -1.5), kirchhoff(1)])
def test_builders_are_lagrangian(cond):
    assert cond.lagrangian_dimension() == cond.degree


def test_general_lagrangian_rank_two():
    q = np.diag([1.0, 1.0, 0.0])
    r = np.diag([0.3, -2.0, 0.0])
    assert general(q, r).lagrangian_dimension() == 3


def test_validate_reports():
    g = build_topological_graph(["a", "b", "c"], [(0, "a", "b"), (1, "b", "c"), (2, "c", "a")])
    rep = validate(assign(g))
    assert rep.ok and rep.c_r_attained == 0
    a = assign(g, overrides={"b": {"delta": -3}})
    assert validate(a).c_r_attained == pytest.approx(3.0)
    assert validate(a) == validate(a)


def test_validate_flags_perturbed_projector():
    g = build_topological_graph([0, 1], [("e", 0, 1)])
    q = np.array([[1.0 + 1e-6]])
    a = assign(g, overrides={0: {"Q": q.tolist(), "R": [[0.0]]}})
    rep = validate(a)
    assert not rep.ok and "idempotent" in rep.violations[0]


def test_validate_flags_declared_bound_and_structure():
    g = build_topological_graph([0, 1], [("e", 0, 1), ("f", 0, 1)])
    a = assign(g, overrides={0: {"delta": 5}}, c_r=1.0)
    assert any("exceeds" in v for v in validate(a).violations)
    bad = assign(g, overrides={1: {"Q": [[1, 0], [0, 0]], "R": [[0, 1], [1, 0]]}})
    assert any("ran Q" in v for v in validate(bad).violations)


def test_parse_errors():
    with pytest.raises(ConditionError):
        parse_condition("robin", 2)
    with pytest.raises(ConditionError):
        parse_condition({"Q": [[1.0]]}, 2)
