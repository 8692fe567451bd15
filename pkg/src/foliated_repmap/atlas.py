"""Base roadmap over the unconstrained space: trajectories -> GMM -> graph."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .environment import Environment, ValidityTag
from .foliation import ContractError
from .rrt import SegmentChecker, bidirectional_rrt, shortcut

LAMBDA_FLOOR = 1e-6
ROADMAP_SCHEMA = "foliated-roadmap/1"


@dataclass(frozen=True)
class GaussianComponent:
    id: int
    mean: np.ndarray = field(compare=False)
    covariance: np.ndarray = field(compare=False)
    weight: float = 1.0

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass
class TrajectoryDataset:
    trajectories: list[np.ndarray]

    def waypoints(self) -> np.ndarray:
        return np.concatenate(self.trajectories, axis=0)


@dataclass
class ClusteringConfig:
    k_min: int = 6
    k_max: int = 14
    max_iter: int = 200
    tol: float = 1e-6
    seed: int = 0
    lambda_floor: float = LAMBDA_FLOOR


@dataclass
class GmmFit:
    components: list[GaussianComponent]
    log_likelihoods: dict[int, list[float]]
    bic: dict[int, float]


@dataclass
class BaseRoadmap:
    components: list[GaussianComponent]
    edges: set[tuple[int, int]]
    votes: dict[tuple[int, int], int] = field(default_factory=dict)

    def neighbors(self) -> dict[int, list[int]]:
        nb = {c.id: [] for c in self.components}
        for a, b in sorted(self.edges):
            nb[a].append(b)
            nb[b].append(a)
        return nb

    def pruned(self) -> "BaseRoadmap":
        """Largest connected component, ids renumbered in order, weights renormalised."""
        nb = self.neighbors()
        seen, groups = set(), []
        for c in sorted(nb):
            if c in seen:
                continue
            stack, group = [c], []
            seen.add(c)
            while stack:
                u = stack.pop()
                group.append(u)
                for v in nb[u]:
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            groups.append(sorted(group))
        keep = max(groups, key=lambda g: (len(g), -g[0]))
        remap = {old: new for new, old in enumerate(keep)}
        total = sum(self.components[o].weight for o in keep)
        comps = [GaussianComponent(remap[o], self.components[o].mean, self.components[o].covariance,
                                   self.components[o].weight / total) for o in keep]
        edges = {tuple(sorted((remap[a], remap[b]))) for a, b in self.edges if a in remap and b in remap}
        votes = {tuple(sorted((remap[a], remap[b]))): v for (a, b), v in self.votes.items()
                 if a in remap and b in remap}
        return BaseRoadmap(comps, edges, votes)


# -- dataset -----------------------------------------------------------------

def generate_dataset(env: Environment, n_pairs: int, seed: int = 0, *, step_size: float = 0.5,
                     waypoint_spacing: float = 0.5, max_retries: int = 20,
                     max_iterations: int = 2000, smoothing_attempts: int = 50) -> TrajectoryDataset:
    """Plan between ``n_pairs`` random valid configurations in ``env``.

    Paths are shortcut-smoothed and resampled every ``waypoint_spacing`` so
    the clustering sees points along each trajectory, not just its corners.
    """
    if n_pairs < 1:
        raise ContractError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = env.lower, env.upper

    def tagger(q):
        out = np.zeros(len(q), dtype=np.int8)
        out[env.robot_collides(q)] = ValidityTag.ROBOT_INVALID
        return out

    def valid_sample():
        for _ in range(10_000):
            q = rng.uniform(lo, hi)
            if tagger(q[None, :])[0] == 0:
                return q
        raise RuntimeError("could not sample a valid configuration")

    checker = SegmentChecker(tagger, step_size / 4.0)
    trajectories = []
    for _ in range(n_pairs):
        for _attempt in range(max_retries):
            a, b = valid_sample(), valid_sample()
            res = bidirectional_rrt(a, b, lambda: rng.uniform(lo, hi), tagger, rng,
                                    step_size=step_size, max_iterations=max_iterations)
            if res.success:
                break
        else:
            raise RuntimeError("planner failed on every retry of a dataset pair")
        path = shortcut(res.path, checker, rng, smoothing_attempts, step_size)
        trajectories.append(resample(path, waypoint_spacing))
    return TrajectoryDataset(trajectories)


def resample(path, spacing: float) -> np.ndarray:
    """Points every ``spacing`` along the polyline, always keeping both endpoints."""
    path = np.asarray(path, dtype=float)
    out = [path[0]]
    for a, b in zip(path[:-1], path[1:]):
        n = max(1, math.ceil(np.linalg.norm(b - a) / spacing))
        for i in range(1, n + 1):
            out.append(a + (b - a) * (i / n))
    return np.array(out)


# -- GMM ---------------------------------------------------------------------

def _log_gauss(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    chol = np.linalg.cholesky(cov)
    z = np.linalg.solve(chol, (x - mean).T)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (np.sum(z * z, axis=0) + logdet + d * math.log(2 * math.pi))


def _floor_cov(cov: np.ndarray, lam: float) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    return (v * np.maximum(w, lam)) @ v.T


def _log_joint(x, weights, means, covs):
    cols = []
    for w, m, c in zip(weights, means, covs):
        cols.append((math.log(w) if w > 0 else -np.inf) + _log_gauss(x, m, c))
    return np.stack(cols, axis=1)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers.append(x[rng.integers(len(x))])
        else:
            centers.append(x[rng.choice(len(x), p=d2 / total)])
        d2 = np.minimum(d2, np.sum((x - centers[-1]) ** 2, axis=1))
    return np.array(centers)


def em_fit(x: np.ndarray, k: int, rng: np.random.Generator, max_iter=200, tol=1e-6,
           lambda_floor=LAMBDA_FLOOR):
    """EM for a full-covariance mixture; returns ``(weights, means, covs, ll_history)``.

    The covariance update clips eigenvalues at ``lambda_floor``, which is the
    exact maximiser under that constraint, so the log-likelihood stays
    monotone.
    """
    n, d = x.shape
    means = _kmeanspp(x, k, rng)
    labels = np.argmin(((x[:, None, :] - means[None]) ** 2).sum(-1), axis=1)
    covs, weights = [], []
    glob = _floor_cov(np.cov(x.T).reshape(d, d) if n > 1 else np.eye(d), lambda_floor)
    for j in range(k):
        pts = x[labels == j]
        if len(pts) > d:
            covs.append(_floor_cov(np.cov(pts.T).reshape(d, d), lambda_floor))
        else:
            covs.append(glob.copy())
        weights.append(max(len(pts), 1) / n)
    weights = np.array(weights) / np.sum(weights)
    covs = np.array(covs)
    history = []
    for _ in range(max_iter):
        lj = _log_joint(x, weights, means, covs)
        ll_each = logsumexp(lj, axis=1)
        history.append(float(ll_each.sum()))
        if len(history) > 1 and history[-1] - history[-2] <= tol * n:
            break
        resp = np.exp(lj - ll_each[:, None])
        nk = resp.sum(axis=0)
        for j in range(k):
            if nk[j] <= 1e-12:
                continue
            m = resp[:, j] @ x / nk[j]
            diff = x - m
            c = (resp[:, j, None] * diff).T @ diff / nk[j]
            means[j] = m
            covs[j] = _floor_cov(c, lambda_floor)
        weights = nk / n
    else:
        history.append(float(logsumexp(_log_joint(x, weights, means, covs), axis=1).sum()))
    return weights, means, covs, history


def _bic(ll: float, k: int, d: int, n: int) -> float:
    params = (k - 1) + k * d + k * d * (d + 1) // 2
    return -2.0 * ll + params * math.log(n)


def fit_gmm_detailed(dataset, config: ClusteringConfig | None = None) -> GmmFit:
    config = config or ClusteringConfig()
    x = dataset.waypoints() if isinstance(dataset, TrajectoryDataset) else np.asarray(dataset, float)
    n, d = x.shape
    if n < config.k_min:
        raise ContractError(f"need at least {config.k_min} waypoints, got {n}")
    best = None
    histories, bics = {}, {}
    for k in range(config.k_min, min(config.k_max, n) + 1):
        rng = np.random.default_rng([config.seed, k])
        w, m, c, hist = em_fit(x, k, rng, config.max_iter, config.tol, config.lambda_floor)
        histories[k] = hist
        bics[k] = _bic(hist[-1], k, d, n)
        if best is None or bics[k] < best[0]:
            best = (bics[k], w, m, c)
    _, w, m, c = best
    keep = [j for j in range(len(w)) if w[j] > 1e-12]
    total = float(np.sum(w[keep]))
    comps = [GaussianComponent(new, m[j].copy(), c[j].copy(), float(w[j] / total))
             for new, j in enumerate(keep)]
    return GmmFit(comps, histories, bics)


def fit_gmm(dataset, config: ClusteringConfig | None = None) -> list[GaussianComponent]:
    """Fit a mixture to all waypoints; component count chosen by BIC."""
    return fit_gmm_detailed(dataset, config).components


class ComponentIndex:
    """Cached Cholesky factors for fast repeated assignment."""

    def __init__(self, components):
        if not components:
            raise ContractError("no components")
        self.components = list(components)
        self.means = np.array([c.mean for c in components])
        self.chol_inv = []
        self.const = []
        d = self.means.shape[1]
        for c in components:
            chol = np.linalg.cholesky(c.covariance)
            self.chol_inv.append(np.linalg.inv(chol))
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            self.const.append(math.log(c.weight) - 0.5 * (logdet + d * math.log(2 * math.pi)))
        self.chol_inv = np.array(self.chol_inv)
        self.const = np.array(self.const)

    def log_scores(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(q)
        diff = q[:, None, :] - self.means[None]
        z = np.einsum("kij,nkj->nki", self.chol_inv, diff)
        return self.const[None, :] - 0.5 * np.sum(z * z, axis=-1)

    def assign(self, q: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum: ties go to the lowest id
        return np.argmax(self.log_scores(q), axis=1)


def assign_distribution(q, components) -> int:
    """Component with the largest weighted density at ``q`` (lowest id on ties)."""
    index = components if isinstance(components, ComponentIndex) else ComponentIndex(components)
    return int(index.components[int(index.assign(np.asarray(q, float))[0])].id)


def distribution_sequence(traj, index: ComponentIndex) -> list[int]:
    ids = [int(index.components[j].id) for j in index.assign(np.asarray(traj, float))]
    seq = [ids[0]]
    for j in ids[1:]:
        if j != seq[-1]:
            seq.append(j)
    return seq


def build_base_roadmap(dataset, components, tau_edge: int = 2) -> BaseRoadmap:
    """Edges between distributions that at least ``tau_edge`` trajectories link."""
    if tau_edge < 1:
        raise ContractError("tau_edge must be >= 1")
    trajs = dataset.trajectories if isinstance(dataset, TrajectoryDataset) else dataset
    index = ComponentIndex(components)
    votes: dict[tuple[int, int], int] = {}
    for traj in trajs:
        seq = distribution_sequence(traj, index)
        pairs = {tuple(sorted(p)) for p in zip(seq, seq[1:])}
        for p in pairs:
            votes[p] = votes.get(p, 0) + 1
    edges = {p for p, v in votes.items() if v >= tau_edge}
    return BaseRoadmap(list(components), edges, votes)


# -- serialisation -----------------------------------------------------------

def roadmap_to_dict(rm: BaseRoadmap, meta: dict | None = None) -> dict:
    return {
        "schema": ROADMAP_SCHEMA,
        "meta": meta or {},
        "components": [
            {"id": c.id, "weight": c.weight, "mean": c.mean.tolist(),
             "covariance": c.covariance.tolist()}
            for c in rm.components
        ],
        "edges": [list(e) for e in sorted(rm.edges)],
        "votes": [[a, b, v] for (a, b), v in sorted(rm.votes.items())],
    }


def roadmap_from_dict(d: dict) -> BaseRoadmap:
    if d.get("schema") != ROADMAP_SCHEMA:
        raise ContractError(f"unsupported roadmap schema {d.get('schema')!r}")
    comps = [GaussianComponent(int(c["id"]), np.array(c["mean"], float),
                               np.array(c["covariance"], float), float(c["weight"]))
             for c in d["components"]]
    edges = {tuple(e) for e in d["edges"]}
    votes = {(a, b): v for a, b, v in d.get("votes", [])}
    return BaseRoadmap(comps, edges, votes)


def save_roadmap(rm: BaseRoadmap, path, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(roadmap_to_dict(rm, meta), indent=1) + "\n")


def load_roadmap(path) -> BaseRoadmap:
    return roadmap_from_dict(json.loads(Path(path).read_text()))


def build_atlas(env: Environment, n_pairs: int = 150, seed: int = 0, tau_edge: int = 2,
                clustering: ClusteringConfig | None = None) -> BaseRoadmap:
    """Dataset, mixture and pruned roadmap in one call."""
    clustering = clustering or ClusteringConfig(seed=seed)
    free = Environment(bounds=env.bounds)
    data = generate_dataset(free, n_pairs, seed)
    comps = fit_gmm(data, clustering)
    return build_base_roadmap(data, comps, tau_edge).pruned()
