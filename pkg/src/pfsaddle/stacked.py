"""Stacked primal/dual iterates and row-wise ball domains.

A network of M nodes, each holding a local pair (x_m, y_m), is represented
by one StackedPoint: an (M, n_x) matrix of minimization variables and an
(M, n_y) matrix of maximization variables, one row per node.  All solvers
in this package operate on whole stacks at once; row-local structure of
the oracles keeps that equivalent to per-node computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidValueError, ShapeError

__all__ = [
    "StackedPoint",
    "BallDomain",
    "frobenius_sq",
    "trace_inner",
    "norm_sq",
    "saddle_step",
]


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StackedPoint:
    """Immutable pair of stacked iterate blocks.

    Parameters
    ----------
    x : array_like, shape (M, n_x)
        Minimization block, row m belongs to node m.
    y : array_like, shape (M, n_y)
        Maximization block, same row convention.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_matrix(self.x, "x block"))
        object.__setattr__(self, "y", _as_matrix(self.y, "y block"))
        if self.x.shape[0] != self.y.shape[0]:
            raise ShapeError(
                "x and y blocks disagree on node count: "
                f"{self.x.shape[0]} vs {self.y.shape[0]}"
            )

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @classmethod
    def replicated(cls, x_row, y_row, num_nodes: int) -> "StackedPoint":
        """Stack the same per-node pair on every node (consensus start)."""
        x_row = np.atleast_1d(np.asarray(x_row, dtype=float))
        y_row = np.atleast_1d(np.asarray(y_row, dtype=float))
        return cls(np.tile(x_row, (num_nodes, 1)), np.tile(y_row, (num_nodes, 1)))

    @classmethod
    def zeros(cls, num_nodes: int, n_x: int, n_y: int) -> "StackedPoint":
        return cls(np.zeros((num_nodes, n_x)), np.zeros((num_nodes, n_y)))

    def _check_like(self, other: "StackedPoint"):
        if self.x.shape != other.x.shape or self.y.shape != other.y.shape:
            raise ShapeError(
                f"shape mismatch: {self.x.shape}/{self.y.shape} vs "
                f"{other.x.shape}/{other.y.shape}"
            )

    def __add__(self, other: "StackedPoint") -> "StackedPoint":
        self._check_like(other)
        return StackedPoint(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "StackedPoint") -> "StackedPoint":
        self._check_like(other)
        return StackedPoint(self.x - other.x, self.y - other.y)

    def __mul__(self, scalar: float) -> "StackedPoint":
        s = float(scalar)
        return StackedPoint(self.x * s, self.y * s)

    __rmul__ = __mul__


def frobenius_sq(a: np.ndarray) -> float:
    """Squared Frobenius norm of a matrix, as a Python float."""
    a = np.asarray(a, dtype=float)
    return float(np.sum(a * a))


def trace_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Trace inner product tr(a^T b) of two equally shaped matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"trace_inner shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def norm_sq(p: StackedPoint) -> float:
    """Squared norm of a stacked point over both blocks."""
    return frobenius_sq(p.x) + frobenius_sq(p.y)


def saddle_step(base: StackedPoint, gamma: float, direction: StackedPoint) -> StackedPoint:
    """One unprojected saddle update: descend in x, ascend in y.

    Returns (base.x - gamma * direction.x, base.y + gamma * direction.y).
    Every solver step in this package goes through here so the sign
    convention lives in exactly one place.
    """
    base._check_like(direction)
    g = float(gamma)
    return StackedPoint(base.x - g * direction.x, base.y + g * direction.y)


def _project_rows(rows: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Project each row of `rows` onto the ball B(center, radius).

    Rows already inside the ball are returned bitwise unchanged.  Rows
    outside are rescaled toward the center; the rescale is repeated until
    a true fixed point of the map is reached, so projecting twice gives
    byte-identical output.
    """
    if math.isinf(radius):
        return rows
    out = np.array(rows, dtype=float, copy=True)
    while True:
        delta = out - center
        norms = np.linalg.norm(delta, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > 0.0, radius / norms, 1.0)
        mask = (norms > radius) & (scale < 1.0)
        if not np.any(mask):
            return out
        out[mask] = center + delta[mask] * scale[mask, None]


@dataclass(frozen=True)
class BallDomain:
    """Per-node feasible set: a Euclidean ball for x and one for y.

    Every node shares the same centers and radii.  Radii may be math.inf,
    which marks the corresponding block unconstrained; projection is then
    the identity and the diameter is infinite.
    """

    radius_x: float
    radius_y: float
    center_x: np.ndarray = field(default=None)
    center_y: np.ndarray = field(default=None)
    n_x: int = None
    n_y: int = None

    def __post_init__(self):
        for name in ("radius_x", "radius_y"):
            r = float(getattr(self, name))
            if math.isnan(r) or r < 0.0:
                raise InvalidValueError(
                    f"{name} must be nonnegative (or inf), got {r}"
                )
            object.__setattr__(self, name, r)
        for name, dim_name in (("center_x", "n_x"), ("center_y", "n_y")):
            c = getattr(self, name)
            dim = getattr(self, dim_name)
            if c is None:
                if dim is None:
                    raise InvalidValueError(
                        f"either {name} or {dim_name} is required"
                    )
                c = np.zeros(int(dim))
            c = np.array(c, dtype=float, copy=True)
            if c.ndim != 1:
                raise ShapeError(f"{name} must be 1-d")
            if not np.all(np.isfinite(c)):
                raise InvalidValueError(f"{name} contains non-finite entries")
            c.setflags(write=False)
            object.__setattr__(self, name, c)
            object.__setattr__(self, dim_name, c.shape[0])

    @classmethod
    def unbounded(cls, n_x: int, n_y: int) -> "BallDomain":
        return cls(math.inf, math.inf, np.zeros(n_x), np.zeros(n_y))

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.radius_x) and math.isfinite(self.radius_y)

    @property
    def diameter(self) -> float:
        """Diameter of the per-node joint ball in (x, y)."""
        if not self.is_bounded:
            return math.inf
        return 2.0 * math.hypot(self.radius_x, self.radius_y)

    def _check_dims(self, p: StackedPoint):
        if p.x.shape[1] != self.n_x or p.y.shape[1] != self.n_y:
            raise ShapeError(
                f"point dims ({p.x.shape[1]}, {p.y.shape[1]}) do not match "
                f"domain dims ({self.n_x}, {self.n_y})"
            )

    def project(self, p: StackedPoint) -> StackedPoint:
        """Row-wise Euclidean projection of both blocks onto the balls."""
        self._check_dims(p)
        return StackedPoint(
            _project_rows(p.x, self.center_x, self.radius_x),
            _project_rows(p.y, self.center_y, self.radius_y),
        )

    def contains(self, p: StackedPoint, tol: float = 1e-9) -> bool:
        """True if every row of both blocks lies within tol of its ball."""
        self._check_dims(p)
        for block, center, radius in (
            (p.x, self.center_x, self.radius_x),
            (p.y, self.center_y, self.radius_y),
        ):
            if math.isinf(radius):
                continue
            norms = np.linalg.norm(block - center, axis=1)
            if np.any(norms > radius + tol * max(1.0, radius)):
                return False
        return True
