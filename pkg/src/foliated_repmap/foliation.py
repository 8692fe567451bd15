"""Configurations, foliations, leaves and intersection witnesses.

A leaf ``(i, k)`` is the manifold ``{q : F_i(q) = theta_k}`` where ``F_i`` is the
constraint function of foliation ``i`` and ``theta_k`` its ``k``-th
co-parameter.  Constraint residuals are measured in the infinity norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_TOLERANCE = 1e-6
DEFAULT_PROJECTION_ITERS = 50


class ContractError(ValueError):
    """Raised when an operation is called outside its preconditions."""


class LeafId(NamedTuple):
    foliation: int
    coparam: int


def as_config(q, dim: int | None = None) -> np.ndarray:
    """Validate ``q`` as a finite configuration of dimension ``dim``."""
    arr = np.asarray(q, dtype=float)
    if arr.ndim != 1:
        raise ContractError(f"configuration must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ContractError(f"configuration has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("configuration has non-finite coordinates")
    return arr


@dataclass(frozen=True)
class CoParameter:
    value: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        value = tuple(float(v) for v in np.atleast_1d(self.value))
        if not all(math.isfinite(v) for v in value):
            raise ContractError(f"co-parameter {self.label!r} has non-finite entries")
        object.__setattr__(self, "value", value)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.value)


@dataclass(frozen=True)
class ConstraintFamily:
    """Constraint function ``F`` of one foliation, in residual form ``F(q) - theta``.

    Two kinds are supported:

    ``affine``
        ``F(q) = A q`` for a full-row-rank matrix ``A``. Selecting coordinates
        (``F(q) = q_y``) is the common special case.
    ``norm``
        ``F(q) = ||q[axes] - center||_2``; leaves are spheres (circles in 2-D).
    """

    kind: str
    dim: int
    matrix: tuple[tuple[float, ...], ...] = ()
    center: tuple[float, ...] = ()
    axes: tuple[int, ...] = ()
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ContractError("constraint tolerance must be positive")
        if self.kind == "affine":
            a = np.asarray(self.matrix, dtype=float)
            if a.ndim != 2 or a.shape[1] != self.dim or a.shape[0] == 0:
                raise ContractError(f"affine matrix must be m x {self.dim}")
            if np.linalg.matrix_rank(a) != a.shape[0]:
                raise ContractError("affine constraint matrix must have full row rank")
            object.__setattr__(self, "matrix", tuple(tuple(map(float, r)) for r in a))
            object.__setattr__(self, "_a", a)
            object.__setattr__(self, "_a_pinv", np.linalg.pinv(a))
        elif self.kind == "norm":
            axes = tuple(int(x) for x in (self.axes or range(self.dim)))
            if len(self.center) != len(axes):
                raise ContractError("norm constraint center must match its axes")
            object.__setattr__(self, "axes", axes)
            object.__setattr__(self, "center", tuple(map(float, self.center)))
        else:
            raise ContractError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def coordinates(cls, axes: Sequence[int], dim: int, tolerance=DEFAULT_TOLERANCE):
        a = np.zeros((len(axes), dim))
        for row, ax in enumerate(axes):
            a[row, ax] = 1.0
        return cls("affine", dim, matrix=tuple(map(tuple, a)), tolerance=tolerance)

    @classmethod
    def sphere(cls, center: Sequence[float], dim: int, axes: Sequence[int] | None = None,
               tolerance=DEFAULT_TOLERANCE):
        axes = tuple(axes) if axes is not None else tuple(range(dim))
        return cls("norm", dim, center=tuple(center), axes=axes, tolerance=tolerance)

    @property
    def codim(self) -> int:
        return len(self.matrix) if self.kind == "affine" else 1

    def value(self, q: np.ndarray) -> np.ndarray:
        """``F(q)``; accepts a single configuration or an ``(n, D)`` batch."""
        q = np.asarray(q, dtype=float)
        if self.kind == "affine":
            return q @ self._a.T
        d = q[..., list(self.axes)] - np.asarray(self.center)
        return np.linalg.norm(d, axis=-1, keepdims=True)

    def eval(self, q: np.ndarray, theta: CoParameter) -> np.ndarray:
        return self.value(q) - theta.array

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        if self.kind == "affine":
            return self._a
        jac = np.zeros((1, self.dim))
        d = q[list(self.axes)] - np.asarray(self.center)
        n = np.linalg.norm(d)
        if n > 0:
            jac[0, list(self.axes)] = d / n
        else:
            jac[0, self.axes[0]] = 1.0
        return jac

    def residual(self, q: np.ndarray, theta: CoParameter) -> np.ndarray:
        """Infinity-norm residual; vectorised over a leading batch axis."""
        return np.abs(np.atleast_1d(self.eval(q, theta))).max(axis=-1)


@dataclass(frozen=True)
class CarriedObject:
    """Footprint of a carried object as a chain of discs.

    The chain runs from the hand ``q[:2]`` to ``q[:2] + offset * (cos a, sin a)``
    with ``a = angle_scale * theta[0] + phase``. One disc means just the far end (a cup held
    at arm's length); more discs describe a rod, whose fit through a passage
    depends on the grasp angle.
    """

    offset: float
    phase: float = 0.0
    discs: int = 1
    angle_scale: float = 1.0

    def __post_init__(self):
        if self.discs < 1:
            raise ContractError("a carried object needs at least one disc")

    def footprint(self, q: np.ndarray, theta: CoParameter) -> np.ndarray:
        """Disc centres, shape ``(..., discs, 2)``."""
        q = np.asarray(q, dtype=float)
        ang = self.angle_scale * theta.value[0] + self.phase
        t = np.linspace(0.0, 1.0, self.discs) if self.discs > 1 else np.ones(1)
        tip = self.offset * np.array([math.cos(ang), math.sin(ang)])
        return q[..., None, :2] + t[:, None] * tip


@dataclass(frozen=True)
class Foliation:
    id: int
    constraint: ConstraintFamily
    co_params: tuple[CoParameter, ...]
    name: str = ""
    carried: CarriedObject | None = None
    similarity_bandwidth: float | None = None
    sim_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cps = tuple(self.co_params)
        if not cps:
            raise ContractError(f"foliation {self.id} has no co-parameters")
        if len({cp.value for cp in cps}) != len(cps):
            raise ContractError(f"foliation {self.id} has duplicate co-parameters")
        for cp in cps:
            if len(cp.value) != self.constraint.codim:
                raise ContractError(
                    f"co-parameter {cp.label!r} has size {len(cp.value)}, "
                    f"constraint codimension is {self.constraint.codim}")
        object.__setattr__(self, "co_params", cps)
        values = np.array([cp.value for cp in cps])
        dists = np.linalg.norm(values[:, None, :] - values[None, :, :], axis=-1)
        sigma = self.similarity_bandwidth
        if sigma is None:
            off = dists[np.triu_indices(len(cps), k=1)]
            sigma = float(np.median(off)) if off.size else 1.0
            if sigma <= 0:
                sigma = 1.0
        elif sigma <= 0:
            raise ContractError("similarity bandwidth must be positive")
        object.__setattr__(self, "similarity_bandwidth", float(sigma))
        sim = np.clip(np.exp(-(dists ** 2) / sigma ** 2), 0.0, 1.0)
        sim.setflags(write=False)
        object.__setattr__(self, "sim_matrix", sim)

    def __len__(self):
        return len(self.co_params)

    def similarity(self, a: int | CoParameter, b: int | CoParameter) -> float:
        """Squared-exponential kernel of the co-parameter distance, in [0, 1]."""
        va = self.co_params[a].array if isinstance(a, (int, np.integer)) else a.array
        vb = self.co_params[b].array if isinstance(b, (int, np.integer)) else b.array
        d2 = float(np.sum((va - vb) ** 2))
        return min(1.0, max(0.0, math.exp(-d2 / self.similarity_bandwidth ** 2)))


@dataclass(frozen=True)
class IntersectionWitness:
    leaf_a: LeafId
    leaf_b: LeafId
    config: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "leaf_a", LeafId(*self.leaf_a))
        object.__setattr__(self, "leaf_b", LeafId(*self.leaf_b))
        object.__setattr__(self, "config", as_config(self.config))
        if self.leaf_a.foliation == self.leaf_b.foliation:
            raise ContractError("leaves of the same foliation never intersect")


def leaf_of(foliations: Sequence[Foliation], leaf) -> tuple[Foliation, CoParameter]:
    i, k = leaf
    try:
        fol = foliations[i]
        return fol, fol.co_params[k]
    except IndexError:
        raise ContractError(f"unknown leaf {tuple(leaf)}") from None


def evaluate_constraint(q, leaf: LeafId, foliations: Sequence[Foliation]) -> float:
    """Residual ``||F_i(q) - theta||_inf`` of ``q`` on ``leaf``."""
    fol, theta = leaf_of(foliations, leaf)
    q = as_config(q, fol.constraint.dim)
    return float(fol.constraint.residual(q, theta))


def project_to_manifold(q, leaf: LeafId, foliations: Sequence[Foliation],
                        max_iters: int = DEFAULT_PROJECTION_ITERS,
                        max_step: float = 1.0) -> np.ndarray | None:
    """Damped Newton projection of ``q`` onto ``leaf``.

    Each step is the minimum-norm Newton correction ``-J^+ r`` clipped to
    ``max_step`` in length. Returns ``None`` when the residual is still above
    the leaf tolerance after ``max_iters`` steps.
    """
    projector = LeafProjector(leaf, foliations, max_iters, max_step)
    return projector(as_config(q, projector.cons.dim))


class LeafProjector:
    """Projection onto one fixed leaf with the constraint data looked up once.

    Calling it gives exactly the result of :func:`project_to_manifold`; the
    motion planner keeps one per task since it projects thousands of points.
    """

    def __init__(self, leaf: LeafId, foliations: Sequence[Foliation],
                 max_iters: int = DEFAULT_PROJECTION_ITERS, max_step: float = 1.0):
        if max_iters < 1:
            raise ContractError("max_iters must be >= 1")
        fol, theta = leaf_of(foliations, leaf)
        self.cons = fol.constraint
        self.theta = theta
        self.target = theta.array
        self.tol = self.cons.tolerance
        self.max_iters, self.max_step = max_iters, max_step
        affine = self.cons.kind == "affine"
        self.a_t = self.cons._a.T if affine else None
        self.a_pinv = self.cons._a_pinv if affine else None

    def __call__(self, q) -> np.ndarray | None:
        q = np.array(q, dtype=float)
        if self.a_t is not None:
            # exact in one step; skipped when already on the leaf to keep q bit-identical
            r = q @ self.a_t - self.target
            if np.abs(r).max() <= self.tol:
                return q
            q = q - self.a_pinv @ r
            return q if np.abs(q @ self.a_t - self.target).max() <= self.tol else None
        cons = self.cons
        for _ in range(self.max_iters):
            r = np.atleast_1d(cons.eval(q, self.theta))
            if np.max(np.abs(r)) <= self.tol:
                return q
            step = -np.linalg.pinv(cons.jacobian(q)) @ r
            n = np.linalg.norm(step)
            if n > self.max_step:
                step *= self.max_step / n
            q = q + step
        return q if cons.residual(q, self.theta) <= self.tol else None


def similarity(fol: Foliation, a, b) -> float:
    return fol.similarity(a, b)
