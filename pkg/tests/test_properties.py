"""Property tests for the experience map and both task planners."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from foliated_repmap.environment import ValidityTag
from foliated_repmap.foliation import LeafId
from foliated_repmap.mdp import node_probabilities
from foliated_repmap.mtg import MtgParams, plan_sequence_mtg, score_table, weighted_adjacency
from foliated_repmap.tasks import PlannerFeedback, Task

from conftest import random_map

seeds = st.integers(0, 2**32 - 1)
INVALID_TAGS = [ValidityTag.ROBOT_INVALID, ValidityTag.OBJECT_INVALID, ValidityTag.CONSTRAINT_INVALID]


def _feedback(rng, n, tags):
    samples = rng.uniform(0.0, 10.0, (n, 2))
    return PlannerFeedback(False, samples, np.array(rng.choice(tags, n), np.int8))


def _random_leaf(rng, m):
    i = int(rng.integers(len(m.foliations)))
    return LeafId(i, int(rng.integers(len(m.foliations[i]))))


def _counts(m):
    return np.concatenate([m.robot_invalid] + [t.ravel() for t in m.valid + m.object_invalid + m.const_invalid])


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(0, 40))
def test_ingest_conserves_mass_and_never_lowers_counts(seed, n):
    rng = np.random.default_rng(seed)
    m = random_map(rng, 10)
    before, mass, ingested = _counts(m), m.total_count_mass(), m.samples_ingested
    leaf = _random_leaf(rng, m)
    m.ingest_feedback(Task(leaf, np.zeros(2), np.zeros(2), []), _feedback(rng, n, list(ValidityTag)))
    assert m.total_count_mass() == mass + n
    assert m.samples_ingested == ingested + n
    assert np.all(_counts(m) >= before)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_edge_weights_non_negative(seed):
    m = random_map(np.random.default_rng(seed), 10)
    adj = weighted_adjacency(m, MtgParams())
    assert all(w >= 0.0 for nbrs in adj for _, w in nbrs)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(INVALID_TAGS))
def test_object_failure_propagates_by_similarity(seed, tag):
    rng = np.random.default_rng(seed)
    m = random_map(rng, 10)
    params = MtgParams()
    before = [t.copy() for t in score_table(m, params)]
    leaf = _random_leaf(rng, m)
    q = rng.uniform(0.0, 10.0, (1, 2))
    j = int(m.index.assign(q)[0])
    m.ingest_feedback(Task(leaf, np.zeros(2), np.zeros(2), []),
                      PlannerFeedback(False, q, np.array([tag], np.int8)))
    after = score_table(m, params)
    for i, fol in enumerate(m.foliations):
        expected = np.zeros_like(before[i])
        if tag == ValidityTag.ROBOT_INVALID:
            expected[:, j] = params.v_plus
        elif i == leaf.foliation:
            expected[:, j] = fol.sim_matrix[leaf.coparam] * params.v_plus
        np.testing.assert_allclose(after[i] - before[i], expected, rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_probabilities_in_unit_interval(seed):
    _, _, p = node_probabilities(random_map(np.random.default_rng(seed), 10))
    assert np.all(p > 0.0) and np.all(p <= 1.0)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 10), st.booleans())
def test_probability_monotone_in_evidence(seed, n, valid):
    rng = np.random.default_rng(seed)
    m = random_map(rng, 10)
    # one valid observation everywhere moves the map off the all-zero special case
    for t in m.valid:
        t += 1
    _, _, p0 = node_probabilities(m)
    tags = [ValidityTag.VALID] if valid else INVALID_TAGS
    m.ingest_feedback(Task(_random_leaf(rng, m), np.zeros(2), np.zeros(2), []), _feedback(rng, n, tags))
    _, _, p1 = node_probabilities(m)
    if valid:
        assert np.all(p1 >= p0)
    else:
        assert np.all(p1 <= p0)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_split_preserves_the_node_sequence(seed):
    rng = np.random.default_rng(seed)
    m = random_map(rng, 10)
    i, j = rng.choice(len(m.nodes), 2, replace=False)
    seq = plan_sequence_mtg(m, m.nodes[i], m.nodes[j])
    if seq is None:
        return
    q0, q1 = rng.uniform(0, 10, 2), rng.uniform(0, 10, 2)
    tasks = m.split_into_tasks(seq, q0, q1)
    assert [n for t in tasks for n in t.nodes] == list(seq)
    assert all(len({n.leaf for n in t.nodes}) == 1 and t.leaf == t.nodes[0].leaf for t in tasks)
    assert all(a.leaf != b.leaf for a, b in zip(tasks, tasks[1:]))
    assert np.array_equal(tasks[0].start_config, q0) and np.array_equal(tasks[-1].goal_config, q1)
    # consecutive tasks meet at a witness that lies on both leaves
    for a, b in zip(tasks, tasks[1:]):
        np.testing.assert_array_equal(a.goal_config, b.start_config)
    for t in tasks:
        assert [c.id for c in t.distribution_list] == [n.dist for n in t.nodes]
