"""MDP task planning: count-based edge success probabilities and value iteration.

States are map nodes plus two absorbing states, DeadEnd and Done. Taking the
edge ``s -> s'`` succeeds with the edge probability ``p`` and otherwise drops
into DeadEnd with a one-time penalty. Entering the goal node pays the goal
reward and moves to Done. Both absorbing states are worth 0 afterwards.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .foliation import ContractError
from .repmap import FoliatedRepMap, NodeId, RepMapEdge


@dataclass(frozen=True)
class MdpParams:
    goal_reward: float = 1.0
    deadend_penalty: float = -0.001
    discount: float = 0.99
    vi_tolerance: float = 1e-6
    vi_max_iters: int = 10_000

    def __post_init__(self):
        if self.goal_reward <= 0:
            raise ContractError("goal_reward must be positive")
        if self.deadend_penalty >= 0:
            raise ContractError("deadend_penalty must be negative")
        if not 0 < self.discount < 1:
            raise ContractError("discount must be in (0, 1)")
        if self.vi_tolerance <= 0 or self.vi_max_iters < 1:
            raise ContractError("vi_tolerance and vi_max_iters must be positive")


def score_tables(m: FoliatedRepMap) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """``(s_plus, s_minus)`` arrays per foliation."""
    robot = m.effective_robot_invalid()
    plus, minus = [], []
    for i, fol in enumerate(m.foliations):
        plus.append(fol.sim_matrix @ m.valid[i])
        minus.append(robot[None, :] + fol.sim_matrix @ (m.object_invalid[i] + m.const_invalid[i]))
    return plus, minus


def compute_scores(m: FoliatedRepMap, node) -> tuple[float, float]:
    n = NodeId(*node)
    if n not in m:
        raise ContractError(f"node {tuple(n)} is not in the map")
    plus, minus = score_tables(m)
    return float(plus[n.foliation][n.coparam, n.dist]), float(minus[n.foliation][n.coparam, n.dist])


def probability_from_scores(sp_m, sp_n, sm_m, sm_n):
    total = sp_m + sp_n + sm_m + sm_n
    if total == 0:
        return 0.5
    return (1.0 + sp_m + sp_n) / (1.0 + sp_m + sp_n + sm_m + sm_n)


def edge_probability(m: FoliatedRepMap, edge: RepMapEdge) -> float:
    pu, mu = compute_scores(m, edge.u)
    pv, mv = compute_scores(m, edge.v)
    return probability_from_scores(pu, pv, mu, mv)


def node_probabilities(m: FoliatedRepMap, uniform: bool = False):
    """Actions as arrays ``(src, dst, p)`` over node indices; parallel edges collapse."""
    if uniform:
        sp = sm = np.zeros(len(m.nodes))
    else:
        plus, minus = score_tables(m)
        sp, sm = m.gather(plus), m.gather(minus)
    src, dst = m.action_pairs()
    total = sp[src] + sp[dst] + sm[src] + sm[dst]
    p = np.where(total == 0, 0.5,
                 (1.0 + sp[src] + sp[dst]) / (1.0 + sp[src] + sp[dst] + sm[src] + sm[dst]))
    return src, dst, p


@dataclass
class ValueIterationResult:
    values: np.ndarray
    q_values: np.ndarray
    sweeps: int
    deltas: list[float] = field(default_factory=list)
    converged: bool = False
    src: np.ndarray | None = None
    dst: np.ndarray | None = None


def value_iteration(n_states: int, src, dst, p, goal: int, params: MdpParams) -> ValueIterationResult:
    """Synchronous Bellman sweeps until the value error bound drops below ``vi_tolerance``.

    Stops once the sup-norm change ``d`` satisfies ``d * g / (1 - g) <= tol``,
    which bounds the distance to the optimal values by ``tol``.
    """
    src, dst, p = np.asarray(src, int), np.asarray(dst, int), np.asarray(p, float)
    active = src != goal
    src, dst, p = src[active], dst[active], p[active]
    into_goal = dst == goal
    g = params.discount
    immediate = p * np.where(into_goal, params.goal_reward, 0.0) + (1.0 - p) * params.deadend_penalty
    cont = np.where(into_goal, 0.0, g * p)
    has_action = np.zeros(n_states, dtype=bool)
    has_action[src] = True
    v = np.zeros(n_states)
    threshold = params.vi_tolerance * (1.0 - g) / g
    res = ValueIterationResult(v, np.empty(0), 0)
    for sweep in range(params.vi_max_iters):
        q = immediate + cont * v[dst]
        new = np.full(n_states, -np.inf)
        np.maximum.at(new, src, q)
        new[~has_action] = 0.0
        delta = float(np.max(np.abs(new - v))) if n_states else 0.0
        v = new
        res.deltas.append(delta)
        res.sweeps = sweep + 1
        if delta <= threshold:
            res.converged = True
            break
    res.values = v
    res.q_values = immediate + cont * v[dst]
    res.src, res.dst = src, dst
    return res


def greedy_sequence(res: ValueIterationResult, start: int, goal: int) -> list[int] | None:
    """Follow the greedy policy; ``None`` when it revisits a state."""
    seq, seen = [start], {start}
    cur = start
    while cur != goal:
        mask = res.src == cur
        if not np.any(mask):
            return None
        qs, ds = res.q_values[mask], res.dst[mask]
        # higher value first, then lower node index
        best = min(range(len(ds)), key=lambda a: (-qs[a], ds[a]))
        cur = int(ds[best])
        if cur in seen:
            return None
        seen.add(cur)
        seq.append(cur)
    return seq


def _reachable(n_states, src, dst, start, goal) -> bool:
    nbrs = [[] for _ in range(n_states)]
    for a, b in zip(src, dst):
        nbrs[a].append(b)
    seen, todo = {start}, deque([start])
    while todo:
        u = todo.popleft()
        if u == goal:
            return True
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return False


def solve(n_states, src, dst, p, start, goal, params: MdpParams):
    """Value iteration plus greedy extraction on an explicit graph."""
    if start == goal:
        return [start], None
    if not _reachable(n_states, src, dst, start, goal):
        return None, None
    res = value_iteration(n_states, src, dst, p, goal, params)
    return greedy_sequence(res, start, goal), res


def plan_sequence_mdp(m: FoliatedRepMap, start, goal, params: MdpParams | None = None,
                      uniform: bool = False) -> list[NodeId] | None:
    params = params or MdpParams()
    start, goal = NodeId(*start), NodeId(*goal)
    for n in (start, goal):
        if n not in m:
            raise ContractError(f"node {tuple(n)} is not in the map")
    idx = m.node_index()
    src, dst, p = node_probabilities(m, uniform)
    seq, _ = solve(len(m.nodes), src, dst, p, idx[start], idx[goal], params)
    return None if seq is None else [m.nodes[i] for i in seq]
