import math

import numpy as np
import pytest

from foliated_repmap.atlas import BaseRoadmap
from foliated_repmap.foliation import ContractError
from foliated_repmap.mdp import (MdpParams, compute_scores, edge_probability, greedy_sequence,
                                 node_probabilities, plan_sequence_mdp, probability_from_scores, solve,
                                 value_iteration)
from foliated_repmap.repmap import FoliatedRepMap, NodeId

import oracles
from conftest import components_on_line, plane_problem, random_map

CHAIN = MdpParams(goal_reward=1.0, deadend_penalty=-1.0, discount=0.95)


def _single(line_base):
    return FoliatedRepMap.instantiate(line_base, plane_problem([5.0]))


def test_zero_counts_zero_scores(line_base):
    assert compute_scores(_single(line_base), (0, 0, 0)) == (0.0, 0.0)


def test_scores_direct_evaluation(line_base):
    m = _single(line_base)
    m.valid[0][0, 1] = 3
    m.robot_invalid[1] = 1
    m.object_invalid[0][0, 1] = 2
    assert compute_scores(m, (0, 0, 1)) == (3.0, 3.0)


def test_scores_cross_leaf(line_base):
    d = 2.0
    m = FoliatedRepMap.instantiate(line_base, plane_problem([2.0, 2.0 + d], sigma=d / math.sqrt(math.log(2))))
    m.valid[0][1, 3] = 4
    sp, sm = compute_scores(m, (0, 0, 3))
    assert sp == pytest.approx(2.0, abs=1e-12) and sm == 0.0


@pytest.mark.parametrize("scores, expected", [
    ((0, 0, 0, 0), 0.5),
    ((3, 1, 0, 1), 5 / 6),
    ((0, 0, 4, 0), 1 / 5),
])
def test_probability_formula(scores, expected):
    assert probability_from_scores(*scores) == pytest.approx(expected, abs=1e-15)


def test_virgin_edges_are_even(line_base):
    m = _single(line_base)
    assert all(edge_probability(m, e) == 0.5 for e in m.edges)
    _, _, p = node_probabilities(m)
    assert np.all(p == 0.5)


def test_params_validated():
    for bad in (dict(goal_reward=0.0), dict(deadend_penalty=0.0), dict(discount=1.0),
                dict(vi_tolerance=0.0)):
        with pytest.raises(ContractError):
            MdpParams(**bad)


def test_start_equals_goal(line_base):
    assert plan_sequence_mdp(_single(line_base), (0, 0, 3), (0, 0, 3)) == [NodeId(0, 0, 3)]


def _chain():
    # 0 -> 1 -> 2 with certain edges, plus a direct 0 -> 2 shortcut that works one time in ten
    src = [0, 1, 1, 2, 0, 2]
    dst = [1, 0, 2, 1, 2, 0]
    p = [1.0, 1.0, 1.0, 1.0, 0.1, 0.1]
    return src, dst, p


def test_chain_prefers_reliable_route():
    seq, res = solve(3, *_chain(), start=0, goal=2, params=CHAIN)
    assert seq == [0, 1, 2]
    # hand solution: V(1) = 1, chain 0.95 * 1, shortcut 0.1 * 1 + 0.9 * (-1)
    q0 = {int(d): float(q) for s, d, q in zip(res.src, res.dst, res.q_values) if s == 0}
    assert q0[1] == pytest.approx(0.95, abs=1e-6)
    assert q0[2] == pytest.approx(-0.8, abs=1e-12)
    assert res.values[1] == pytest.approx(1.0, abs=1e-12)


def test_value_iteration_contracts():
    rng = np.random.default_rng(4)
    n = 12
    src, dst = [], []
    for a in range(n):
        for b in range(n):
            if a != b and rng.random() < 0.4:
                src.append(a)
                dst.append(b)
    p = rng.uniform(0.05, 1.0, len(src))
    res = value_iteration(n, src, dst, p, 0, MdpParams(discount=0.9, vi_tolerance=1e-12))
    assert res.converged
    d = res.deltas
    assert all(b <= 0.9 * a + 1e-15 for a, b in zip(d[1:], d[2:]))


def test_unreachable_goal_is_no_path(line_base):
    m = FoliatedRepMap.instantiate(line_base, plane_problem([2.0], [5.0]))
    assert plan_sequence_mdp(m, (0, 0, 0), (1, 0, 4)) is None


def test_revisiting_policy_is_no_path():
    # a hand-made policy table that bounces between 0 and 1
    res = value_iteration(3, [0, 1, 1], [1, 0, 2], [1.0, 1.0, 1.0], 2, MdpParams())
    res.q_values = np.array([1.0, 5.0, 0.0])
    assert greedy_sequence(res, 0, 2) is None


def test_greedy_tie_goes_to_lower_node():
    # two identical routes 0-1-3 and 0-2-3
    src = [0, 0, 1, 2, 1, 2, 3, 3]
    dst = [1, 2, 3, 3, 0, 0, 1, 2]
    seq, _ = solve(4, src, dst, [0.5] * 8, 0, 3, MdpParams())
    assert seq == [0, 1, 3]


def test_failures_steer_the_policy():
    comps = components_on_line([1.0, 3.0, 5.0, 7.0])
    base = BaseRoadmap(comps, {(0, 1), (1, 3), (0, 2), (2, 3)})
    m = FoliatedRepMap.instantiate(base, plane_problem([5.0]))
    assert [n.dist for n in plan_sequence_mdp(m, (0, 0, 0), (0, 0, 3))] == [0, 1, 3]
    m.object_invalid[0][0, 1] = 5
    assert [n.dist for n in plan_sequence_mdp(m, (0, 0, 0), (0, 0, 3))] == [0, 2, 3]


def _actions(m, src, dst, p):
    acts = [[] for _ in m.nodes]
    for s, d, q in zip(src.tolist(), dst.tolist(), p.tolist()):
        acts[s].append((d, q))
    return acts


@pytest.mark.parametrize("seed", range(25))
def test_random_maps_match_policy_enumeration(seed):
    rng = np.random.default_rng(seed)
    m = random_map(rng, 6)
    params = MdpParams(deadend_penalty=-1.0)
    src, dst, p = node_probabilities(m)
    for s, d, q in zip(src, dst, p):
        plus_u, minus_u = oracles.mdp_scores(m, m.nodes[s])
        plus_v, minus_v = oracles.mdp_scores(m, m.nodes[d])
        assert q == pytest.approx(oracles.probability(plus_u, plus_v, minus_u, minus_v), abs=1e-12)
    i, j = rng.choice(len(m.nodes), 2, replace=False)
    seq, res = solve(len(m.nodes), src, dst, p, int(i), int(j), params)
    if res is None:
        return
    best = oracles.best_policy_value(len(m.nodes), _actions(m, src, dst, p), int(i), int(j),
                                     params.goal_reward, params.deadend_penalty, params.discount)
    assert res.values[i] == pytest.approx(best, abs=1e-6)
    if seq is not None:
        assert seq[0] == i and seq[-1] == j and len(set(seq)) == len(seq)
