"""Gossip matrices over simulated communication graphs.

A gossip matrix W here is the graph Laplacian of a connected undirected
graph (or a positive multiple of it): symmetric, positive semidefinite,
with kernel spanned by the constant vector and sparsity confined to graph
edges.  Multiplying a stacked iterate by W is the one primitive that costs
a communication round; solvers count those rounds, this module only
provides the linear algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    InvalidValueError,
    ShapeError,
    TopologyError,
)
from .rng import Xoshiro256StarStar, derive_seed
from .stacked import StackedPoint, trace_inner

TOPOLOGY_KINDS = ("complete", "ring", "star", "path", "grid2d", "erdos_renyi")

__all__ = [
    "Topology",
    "GossipMatrix",
    "laplacian",
    "scale",
    "power_lambda_max",
    "validate",
    "penalty_value",
    "penalty_grad",
]


@dataclass(frozen=True)
class Topology:
    """A named graph family instance.

    kind : one of complete, ring, star, path, grid2d, erdos_renyi
    num_nodes : number of nodes, at least 2
    seed : RNG seed, only used by erdos_renyi
    edge_prob : edge probability in (0, 1], only used by erdos_renyi
    """

    kind: str
    num_nodes: int
    seed: int = 0
    edge_prob: float = 0.5

    def __post_init__(self):
        if self.kind not in TOPOLOGY_KINDS:
            raise TopologyError(
                f"unknown topology kind {self.kind!r}; expected one of {TOPOLOGY_KINDS}"
            )
        if int(self.num_nodes) < 2:
            raise TopologyError(f"num_nodes must be >= 2, got {self.num_nodes}")
        object.__setattr__(self, "num_nodes", int(self.num_nodes))
        if self.kind == "erdos_renyi":
            p = float(self.edge_prob)
            if not (0.0 < p <= 1.0):
                raise TopologyError(f"edge_prob must be in (0, 1], got {p}")

    def edges(self) -> list[tuple[int, int]]:
        """Sorted edge list as (i, j) pairs with i < j."""
        m = self.num_nodes
        if self.kind == "complete":
            pairs = {(i, j) for i in range(m) for j in range(i + 1, m)}
        elif self.kind == "path":
            pairs = {(i, i + 1) for i in range(m - 1)}
        elif self.kind == "ring":
            pairs = {(i, i + 1) for i in range(m - 1)}
            pairs.add((0, m - 1))
        elif self.kind == "star":
            pairs = {(0, j) for j in range(1, m)}
        elif self.kind == "grid2d":
            pairs = _grid_edges(m)
        else:
            pairs = _erdos_renyi_edges(m, self.edge_prob, self.seed)
        return sorted(pairs)


def _grid_edges(m: int) -> set[tuple[int, int]]:
    """Edges of the first m cells of a near-square lattice, row-major."""
    rows = int(math.floor(math.sqrt(m)))
    cols = int(math.ceil(m / rows))
    pairs = set()
    for idx in range(m):
        _, c = divmod(idx, cols)
        if c + 1 < cols and idx + 1 < m:
            pairs.add((idx, idx + 1))
        if idx + cols < m:
            pairs.add((idx, idx + cols))
    return pairs


def _connected(m: int, pairs: set[tuple[int, int]]) -> bool:
    adjacency = {i: [] for i in range(m)}
    for i, j in pairs:
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        node = stack.pop()
        for nbr in adjacency[node]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return len(seen) == m


def _erdos_renyi_edges(m: int, edge_prob: float, seed: int) -> set[tuple[int, int]]:
    rng = Xoshiro256StarStar(derive_seed(seed, "erdos-renyi", m))
    for _ in range(100):
        pairs = {
            (i, j)
            for i in range(m)
            for j in range(i + 1, m)
            if rng.uniform() < edge_prob
        }
        if _connected(m, pairs):
            return pairs
    raise TopologyError(
        f"no connected Erdos-Renyi draw in 100 attempts "
        f"(num_nodes={m}, edge_prob={edge_prob}); raise edge_prob"
    )


@dataclass(frozen=True)
class GossipMatrix:
    """A concrete gossip matrix with its cached spectral data."""

    w: np.ndarray
    lambda_max: float
    edges: frozenset

    def __post_init__(self):
        w = np.array(self.w, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ShapeError(f"gossip matrix must be square, got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "lambda_max", float(self.lambda_max))
        object.__setattr__(self, "edges", frozenset(map(tuple, self.edges)))

    @property
    def num_nodes(self) -> int:
        return self.w.shape[0]

    @classmethod
    def from_matrix(cls, w, edges=None, tol: float = 1e-12) -> "GossipMatrix":
        """Wrap an explicit matrix, inferring edges from its sparsity."""
        w = np.asarray(w, dtype=float)
        if edges is None:
            nz = np.argwhere(w != 0.0)
            edges = {(min(i, j), max(i, j)) for i, j in nz if i != j}
        return cls(w, _cached_lambda_max(w, tol), frozenset(edges))


def _cached_lambda_max(w, tol: float = 1e-12) -> float:
    """Largest eigenvalue for the constructor cache.

    Power iteration first; graphs whose two top eigenvalues nearly coincide
    cannot settle to 1e-12 within the iteration budget, so those fall back
    to the dense symmetric eigensolver.
    """
    try:
        return power_lambda_max(w, tol=tol)
    except ConvergenceError:
        return float(np.linalg.eigvalsh(np.asarray(w, dtype=float))[-1])


def laplacian(topology: Topology) -> GossipMatrix:
    """Graph Laplacian D - A of the topology, with lambda_max attached."""
    m = topology.num_nodes
    pairs = topology.edges()
    w = np.zeros((m, m))
    for i, j in pairs:
        w[i, j] = w[j, i] = -1.0
        w[i, i] += 1.0
        w[j, j] += 1.0
    return GossipMatrix(w, _cached_lambda_max(w), frozenset(pairs))


def scale(g: GossipMatrix, c: float) -> GossipMatrix:
    """Positive rescale c*W; lambda_max scales along, edges are unchanged."""
    c = float(c)
    if not (c > 0.0) or math.isinf(c):
        raise InvalidValueError(f"scale factor must be a positive finite number, got {c}")
    return GossipMatrix(c * g.w, c * g.lambda_max, g.edges)


def power_lambda_max(w, tol: float = 1e-12, max_iter: int | None = None,
                     seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Starts from a seeded random unit vector and iterates v <- Wv / |Wv|,
    stopping when the Rayleigh quotient changes by at most
    tol * max(1, lambda).  Symmetry is required; PSD-ness is assumed (for
    an indefinite matrix the result would be the largest |eigenvalue|).

    Raises ConvergenceError if the quotient has not settled within
    max_iter iterations (default 10 * M * ln(M) + 100).
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeError(f"matrix must be square, got {w.shape}")
    scale_ref = float(np.max(np.abs(w))) if w.size else 0.0
    if float(np.max(np.abs(w - w.T))) > 1e-12 * max(1.0, scale_ref):
        raise InvalidValueError("power_lambda_max requires a symmetric matrix")
    m = w.shape[0]
    if not w.any():
        return 0.0
    if max_iter is None:
        max_iter = int(10 * m * math.log(max(m, 2))) + 100
    rng = Xoshiro256StarStar(derive_seed(seed, "power-iteration", m))
    v = rng.normals((m,))
    v /= np.linalg.norm(v)
    rayleigh = float(v @ (w @ v))
    for _ in range(max_iter):
        wv = w @ v
        nrm = float(np.linalg.norm(wv))
        if nrm == 0.0:
            # start vector landed in the kernel; re-randomize
            v = rng.normals((m,))
            v /= np.linalg.norm(v)
            rayleigh = float(v @ (w @ v))
            continue
        v = wv / nrm
        new_rayleigh = float(v @ (w @ v))
        if abs(new_rayleigh - rayleigh) <= tol * max(1.0, abs(new_rayleigh)):
            return new_rayleigh
        rayleigh = new_rayleigh
    raise ConvergenceError(
        f"power iteration did not settle within {max_iter} iterations"
    )


def validate(g: GossipMatrix) -> None:
    """Check the structural contract of a gossip matrix, raising on failure.

    Verifies: exact symmetry, positive semidefiniteness (smallest
    eigenvalue >= -1e-10), constant vectors in the kernel (|W 1| <= 1e-12),
    kernel dimension exactly one (graph connectivity), and off-diagonal
    sparsity confined to the stored edge set.
    """
    w = g.w
    m = g.num_nodes
    if not np.array_equal(w, w.T):
        raise InvalidValueError("gossip matrix is not symmetric")
    ones = np.ones(m)
    if float(np.linalg.norm(w @ ones)) > 1e-12:
        raise InvalidValueError("constant vector is not in the kernel of W")
    evals = np.linalg.eigvalsh(w)
    if evals[0] < -1e-10:
        raise InvalidValueError(f"matrix is not PSD (smallest eigenvalue {evals[0]:.3e})")
    gap_ref = max(1.0, float(evals[-1]))
    if evals[1] <= 1e-12 * gap_ref:
        raise InvalidValueError(
            "kernel dimension exceeds one (underlying graph is disconnected)"
        )
    for i in range(m):
        for j in range(m):
            if i != j and w[i, j] != 0.0 and (min(i, j), max(i, j)) not in g.edges:
                raise InvalidValueError(f"nonzero entry at non-edge position ({i}, {j})")


def _check_penalty_args(g: GossipMatrix, lam: float, p: StackedPoint):
    if lam < 0.0 or not math.isfinite(lam):
        raise InvalidValueError(f"penalty weight must be finite and >= 0, got {lam}")
    if p.num_nodes != g.num_nodes:
        raise ShapeError(
            f"point has {p.num_nodes} rows but gossip matrix has {g.num_nodes}"
        )


def penalty_value(g: GossipMatrix, lam: float, p: StackedPoint) -> float:
    """Consensus penalty (lam/2) tr(X^T W X) - (lam/2) tr(Y^T W Y)."""
    _check_penalty_args(g, lam, p)
    if lam == 0.0:
        return 0.0
    return 0.5 * lam * (trace_inner(p.x, g.w @ p.x) - trace_inner(p.y, g.w @ p.y))


def penalty_grad(g: GossipMatrix, lam: float, p: StackedPoint) -> StackedPoint:
    """Gradient pair of the consensus penalty: (lam W X, -lam W Y).

    The y block carries the sign of the true partial derivative, so
    adding this to a local-objective gradient pair gives the gradient
    pair of the full objective.  One evaluation corresponds to one
    gossip communication round; callers account for it.
    """
    _check_penalty_args(g, lam, p)
    return StackedPoint(lam * (g.w @ p.x), -lam * (g.w @ p.y))
