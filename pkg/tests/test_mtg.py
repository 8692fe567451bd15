import math

import numpy as np
import pytest

from foliated_repmap.atlas import BaseRoadmap
from foliated_repmap.environment import ValidityTag
from foliated_repmap.foliation import ContractError, LeafId
from foliated_repmap.mtg import (MtgParams, compute_node_score, edge_weight, plan_sequence_mtg,
                                 score_table, sequence_weight, shortest_path)
from foliated_repmap.repmap import FoliatedRepMap, NodeId
from foliated_repmap.tasks import PlannerFeedback, Task

import oracles
from conftest import components_on_line, plane_problem, random_map


def _single(line_base):
    return FoliatedRepMap.instantiate(line_base, plane_problem([5.0]))


def test_zero_counts_zero_score(line_base):
    m = _single(line_base)
    assert compute_node_score(m, (0, 0, 2), MtgParams()) == 0.0


def test_score_direct_evaluation(line_base):
    m = _single(line_base)
    m.robot_invalid[1] = 2
    m.valid[0][0, 1] = 3
    m.object_invalid[0][0, 1] = 1
    assert compute_node_score(m, (0, 0, 1), MtgParams(1.0, 10.0)) == 33.0


def test_score_cross_leaf_term(line_base):
    # bandwidth chosen so the two co-parameters are exactly half similar
    d = 3.0
    m = FoliatedRepMap.instantiate(line_base, plane_problem([2.0, 2.0 + d], sigma=d / math.sqrt(math.log(2))))
    m.valid[0][1, 4] = 4
    assert m.foliations[0].sim_matrix[0, 1] == pytest.approx(0.5, abs=1e-15)
    assert compute_node_score(m, (0, 0, 4), MtgParams()) == pytest.approx(2.0, abs=1e-12)


def test_edge_weight_is_endpoint_sum(line_base):
    m = _single(line_base)
    m.robot_invalid[1] = 2
    m.valid[0][0, 1] = 3
    m.object_invalid[0][0, 1] = 1
    m.valid[0][0, 2] = 2
    p = MtgParams(1.0, 10.0)
    e = next(e for e in m.edges if {e.u.dist, e.v.dist} == {1, 2})
    assert edge_weight(m, e, p) == 35.0
    e0 = next(e for e in m.edges if {e.u.dist, e.v.dist} == {3, 4})
    assert edge_weight(m, e0, p) == 0.0


def test_params_validated():
    with pytest.raises(ContractError):
        MtgParams(v_minus=5.0, v_plus=1.0)
    with pytest.raises(ContractError):
        MtgParams(v_minus=0.0)


def test_start_equals_goal(line_base):
    m = _single(line_base)
    assert plan_sequence_mtg(m, (0, 0, 2), (0, 0, 2)) == [NodeId(0, 0, 2)]
    assert sequence_weight(m, [NodeId(0, 0, 2)], MtgParams()) == 0.0


def test_tie_prefers_fewer_hops():
    # 0-1-2-3-4-7 has five edges and lexicographically smaller ids; 0-5-6-7 has three
    comps = components_on_line(np.linspace(1, 9, 8))
    base = BaseRoadmap(comps, {(0, 1), (1, 2), (2, 3), (3, 4), (4, 7), (0, 5), (5, 6), (6, 7)})
    m = FoliatedRepMap.instantiate(base, plane_problem([5.0]))
    assert [n.dist for n in plan_sequence_mtg(m, (0, 0, 0), (0, 0, 7))] == [0, 5, 6, 7]


def test_equal_hops_tie_is_lexicographic():
    comps = components_on_line([1.0, 3.0, 5.0, 7.0])
    base = BaseRoadmap(comps, {(0, 2), (2, 3), (0, 1), (1, 3)})
    m = FoliatedRepMap.instantiate(base, plane_problem([5.0]))
    assert [n.dist for n in plan_sequence_mtg(m, (0, 0, 0), (0, 0, 3))] == [0, 1, 3]


def test_unreachable_goal(line_base):
    m = FoliatedRepMap.instantiate(line_base, plane_problem([2.0], [5.0]))
    assert plan_sequence_mtg(m, (0, 0, 0), (1, 0, 0)) is None


def test_unknown_node_rejected(line_base):
    with pytest.raises(ContractError):
        plan_sequence_mtg(_single(line_base), (0, 0, 0), (0, 3, 0))


def test_shortest_path_on_explicit_graph():
    adj = [[(1, 1.0), (2, 5.0)], [(0, 1.0), (2, 1.0)], [(0, 5.0), (1, 1.0)]]
    assert shortest_path(adj, 0, 2) == (2.0, [0, 1, 2])
    assert shortest_path([[], []], 0, 1) == (float("inf"), None)


def test_unavoidable_failure_adds_to_path_weight(two_row_problem, line_base):
    m = FoliatedRepMap.instantiate(line_base, two_row_problem)
    s, g = NodeId(0, 0, 0), NodeId(0, 0, 4)
    assert [n.dist for n in plan_sequence_mtg(m, s, g)] == [0, 1, 2, 3, 4]
    task = Task(LeafId(0, 0), np.zeros(2), np.zeros(2), [])
    fb = PlannerFeedback(False, np.array([[5.0, 2.0]]), np.array([ValidityTag.OBJECT_INVALID], np.int8))
    m.ingest_feedback(task, fb)
    path = plan_sequence_mtg(m, s, g)
    assert path[0] == s and path[-1] == g
    assert sequence_weight(m, path, MtgParams()) == 100.0


@pytest.mark.parametrize("seed", range(30))
def test_random_maps_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    m = random_map(rng, 10)
    params = MtgParams()
    table = score_table(m, params)
    weights = {tuple(n): float(table[n.foliation][n.coparam, n.dist]) for n in m.nodes}
    for n in m.nodes:
        assert weights[tuple(n)] == pytest.approx(oracles.mtg_score(m, n, 1.0, 50.0), rel=1e-12, abs=1e-12)
    i, j = rng.choice(len(m.nodes), 2, replace=False)
    s, g = tuple(m.nodes[i]), tuple(m.nodes[j])
    best = oracles.min_simple_path_weight(oracles.neighbours(m), weights, s, g)
    path = plan_sequence_mtg(m, s, g, params)
    if math.isinf(best):
        assert path is None
    else:
        assert sequence_weight(m, path, params) == best


def test_uniform_mode_ignores_counts(line_base):
    m = _single(line_base)
    m.object_invalid[0][0, 2] = 100
    plain = plan_sequence_mtg(m, (0, 0, 0), (0, 0, 4), uniform=True)
    assert [n.dist for n in plain] == [0, 1, 2, 3, 4]
