"""MTG task planning: count-based node scores, additive edge weights, Dijkstra."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .foliation import ContractError
from .repmap import FoliatedRepMap, NodeId, RepMapEdge


@dataclass(frozen=True)
class MtgParams:
    v_minus: float = 1.0
    v_plus: float = 50.0

    def __post_init__(self):
        if not 0 < self.v_minus < self.v_plus:
            raise ContractError("MTG penalties need 0 < v_minus < v_plus")


def score_table(m: FoliatedRepMap, params: MtgParams) -> list[np.ndarray]:
    """Scores of every node, one ``(n_coparams, n_dist)`` array per foliation."""
    robot = m.effective_robot_invalid() * params.v_plus
    out = []
    for i, fol in enumerate(m.foliations):
        per_leaf = params.v_minus * m.valid[i] + params.v_plus * (m.object_invalid[i]
                                                                   + m.const_invalid[i])
        out.append(robot[None, :] + fol.sim_matrix @ per_leaf)
    return out


def compute_node_score(m: FoliatedRepMap, node, params: MtgParams) -> float:
    n = NodeId(*node)
    if n not in m:
        raise ContractError(f"node {tuple(n)} is not in the map")
    # same arithmetic as the planner's table so path weights compare exactly
    return float(score_table(m, params)[n.foliation][n.coparam, n.dist])


def edge_weight(m: FoliatedRepMap, edge: RepMapEdge, params: MtgParams) -> float:
    return compute_node_score(m, edge.u, params) + compute_node_score(m, edge.v, params)


def weighted_adjacency(m: FoliatedRepMap, params: MtgParams, uniform: bool = False):
    """Per node index: sorted ``(neighbor, weight)`` pairs; parallel edges collapse."""
    scores = np.zeros(len(m.nodes)) if uniform else m.gather(score_table(m, params))
    src, dst = m.action_pairs()
    w = (scores[src] + scores[dst]).tolist()
    adj = [[] for _ in m.nodes]
    for u, v, c in zip(src.tolist(), dst.tolist(), w):
        adj[u].append((v, c))
    return adj


def shortest_path(adj, start: int, goal: int):
    """Dijkstra on ``(weight, hops, path)`` keys.

    Node indices are assumed to follow node-id order, so comparing index paths
    breaks remaining ties lexicographically. Returns ``(weight, path)`` or
    ``(inf, None)``.
    """
    best = {start: (0.0, 0, (start,))}
    heap = [(0.0, 0, (start,))]
    done = set()
    while heap:
        w, h, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == goal:
            return w, list(path)
        for v, c in adj[u]:
            if v in done:
                continue
            key = (w + c, h + 1, path + (v,))
            if v not in best or key < best[v]:
                best[v] = key
                heapq.heappush(heap, key)
    return float("inf"), None


def plan_sequence_mtg(m: FoliatedRepMap, start, goal, params: MtgParams | None = None,
                      uniform: bool = False) -> list[NodeId] | None:
    """Minimum-weight node path from ``start`` to ``goal``, or ``None``.

    ``uniform`` plans on all-zero weights without reading any counts.
    """
    params = params or MtgParams()
    start, goal = NodeId(*start), NodeId(*goal)
    for n in (start, goal):
        if n not in m:
            raise ContractError(f"node {tuple(n)} is not in the map")
    idx = m.node_index()
    _, path = shortest_path(weighted_adjacency(m, params, uniform), idx[start], idx[goal])
    return None if path is None else [m.nodes[i] for i in path]


def sequence_weight(m: FoliatedRepMap, sequence, params: MtgParams) -> float:
    table = score_table(m, params)
    s = [table[n.foliation][n.coparam, n.dist] for n in map(lambda x: NodeId(*x), sequence)]
    w = 0.0
    for a, b in zip(s, s[1:]):
        w += a + b
    return w
