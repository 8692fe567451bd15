"""Brute-force reference implementations used only by the tests.

Everything here is written with plain Python loops and dictionaries so it
shares no arithmetic shortcuts with the package code.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def kernel(a, b, sigma):
    d2 = sum((x - y) ** 2 for x, y in zip(a, b))
    return math.exp(-d2 / sigma ** 2)


def node_counts(m, node):
    """Raw counts of one node as a dict of floats, read straight off the arrays."""
    i, k, j = node
    return {
        "valid": float(m.valid[i][k, j]),
        "obj": float(m.object_invalid[i][k, j]),
        "const": float(m.const_invalid[i][k, j]),
        "robot": float(m.robot_invalid[j] + m.robot_invalid_prior[j]),
    }


def _coparam_sims(m, i, k):
    fol = m.foliations[i]
    sigma = fol.similarity_bandwidth
    me = fol.co_params[k].value
    return [(k2, kernel(me, cp.value, sigma)) for k2, cp in enumerate(fol.co_params)]


def mtg_score(m, node, v_minus, v_plus):
    i, k, j = node
    total = node_counts(m, node)["robot"] * v_plus
    for k2, s in _coparam_sims(m, i, k):
        c = node_counts(m, (i, k2, j))
        total += s * (v_minus * c["valid"] + v_plus * (c["obj"] + c["const"]))
    return total


def mdp_scores(m, node):
    i, k, j = node
    plus = 0.0
    minus = node_counts(m, node)["robot"]
    for k2, s in _coparam_sims(m, i, k):
        c = node_counts(m, (i, k2, j))
        plus += s * c["valid"]
        minus += s * (c["obj"] + c["const"])
    return plus, minus


def probability(sp_m, sp_n, sm_m, sm_n):
    if sp_m + sp_n + sm_m + sm_n == 0:
        return 0.5
    return (1 + sp_m + sp_n) / (1 + sp_m + sp_n + sm_m + sm_n)


def neighbours(m):
    """Undirected simple graph over node ids, parallel edges merged."""
    nb = {tuple(n): set() for n in m.nodes}
    for e in m.edges:
        nb[tuple(e.u)].add(tuple(e.v))
        nb[tuple(e.v)].add(tuple(e.u))
    return nb


def min_simple_path_weight(nb, node_weight, start, goal):
    """Minimum over all simple paths of the left-folded sum of endpoint weights."""
    if start == goal:
        return 0.0
    best = math.inf
    stack = [(start, (start,), 0.0)]
    while stack:
        u, path, w = stack.pop()
        for v in nb[u]:
            if v in path:
                continue
            w2 = w + (node_weight[u] + node_weight[v])
            if v == goal:
                best = min(best, w2)
            else:
                stack.append((v, path + (v,), w2))
    return best


def policy_value(n, actions, policy, goal, reward, penalty, gamma):
    """Exact values of a deterministic stationary policy by one linear solve.

    ``actions[s]`` lists ``(dst, p)``; ``policy[s]`` picks an index into it.
    States without actions (and the goal) are worth 0.
    """
    a = np.eye(n)
    r = np.zeros(n)
    for s in range(n):
        if s == goal or not actions[s]:
            continue
        dst, p = actions[s][policy[s]]
        if dst == goal:
            r[s] = p * reward + (1 - p) * penalty
        else:
            r[s] = (1 - p) * penalty
            a[s, dst] -= gamma * p
    return np.linalg.solve(a, r)


def best_policy_value(n, actions, start, goal, reward, penalty, gamma):
    """Maximum start value over every deterministic stationary policy."""
    choosers = [range(len(actions[s])) if actions[s] and s != goal else [0] for s in range(n)]
    best = -math.inf
    for pol in itertools.product(*choosers):
        best = max(best, policy_value(n, actions, pol, goal, reward, penalty, gamma)[start])
    return best
