"""Weighted graphs, the discrete Laplacian and the discrete Upsilon-calculus.

Vertex functions are plain numpy arrays whose last axis is aligned with
``WeightedGraph.vertices``; every operator here broadcasts over leading axes,
so a whole grid of vertex functions can be pushed through at once.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .upsilon import upsilon, upsilon_prime

__all__ = [
    "GraphError",
    "UnreachableError",
    "NamedFunction",
    "UPSILON",
    "UPSILON_PRIME",
    "EXP",
    "SQUARE_HALF",
    "WeightedGraph",
    "GraphValidationReport",
    "ld_apply",
    "psi_h",
    "b_h",
    "psi_upsilon",
    "psi2_upsilon",
    "gamma_graph",
    "gamma2_graph",
    "graph_distance",
    "k_min",
    "validate",
    "heat_semigroup_apply",
    "load_graph",
    "dump_graph",
    "two_point",
    "complete",
    "cycle",
    "square",
    "complete_bipartite",
    "path",
    "star",
]


class GraphError(ValueError):
    """Raised for malformed graphs or functions that do not match a graph."""


class UnreachableError(GraphError):
    """Raised when two vertices are not joined by a path in the support of k."""


@dataclass(frozen=True)
class NamedFunction:
    """A real function together with a tag that reports can print."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.fn(x)


def _exp(x):
    with np.errstate(over="ignore"):
        return np.exp(x)


UPSILON = NamedFunction("upsilon", upsilon)
UPSILON_PRIME = NamedFunction("upsilon_prime", upsilon_prime)
EXP = NamedFunction("exp", _exp)
SQUARE_HALF = NamedFunction("square_half", lambda x: 0.5 * np.square(x))


class WeightedGraph:
    """Finite vertex set with a nonnegative kernel ``k(y, z)`` and zero diagonal.

    Instances are immutable. ``kernel`` is a read-only dense matrix with
    ``kernel[i, j] = k(vertices[i], vertices[j])``; ``neighbours[i]`` lists the
    indices ``j`` with ``k(y_i, y_j) > 0``.
    """

    def __init__(self, vertices: Sequence[Hashable], kernel):
        vertices = tuple(vertices)
        if len(set(vertices)) != len(vertices):
            raise GraphError("duplicate vertex identifiers")
        k = np.array(kernel, dtype=float)
        m = len(vertices)
        if k.shape != (m, m):
            raise GraphError(f"kernel shape {k.shape} does not match {m} vertices")
        if not np.all(np.isfinite(k)):
            raise GraphError("kernel weights must be finite")
        if np.any(k < 0):
            raise GraphError("kernel weights must be nonnegative")
        if np.any(np.diag(k) != 0):
            raise GraphError("kernel must have zero diagonal (k(y,y) = 0)")
        k.setflags(write=False)
        self.vertices = vertices
        self.kernel = k
        self.index = {v: i for i, v in enumerate(vertices)}
        self.neighbours = tuple(tuple(np.flatnonzero(k[i] > 0).tolist()) for i in range(m))
        lap = k - np.diag(k.sum(axis=1))
        lap.setflags(write=False)
        self.laplacian = lap
        self._heat_cache: dict[float, np.ndarray] = {}

    # construction helpers -------------------------------------------------
    @classmethod
    def from_edges(
        cls,
        vertices: Sequence[Hashable],
        edges: Iterable[tuple[Hashable, Hashable, float]],
        symmetric: bool = True,
    ) -> "WeightedGraph":
        vertices = tuple(vertices)
        idx = {v: i for i, v in enumerate(vertices)}
        k = np.zeros((len(vertices), len(vertices)))
        for a, b, w in edges:
            if a not in idx or b not in idx:
                raise GraphError(f"edge ({a!r}, {b!r}) uses an unknown vertex")
            if a == b:
                raise GraphError(f"self loop at {a!r}: k(y,y) must be 0")
            k[idx[a], idx[b]] = w
            if symmetric:
                k[idx[b], idx[a]] = w
        return cls(vertices, k)

    @property
    def size(self) -> int:
        return len(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        n_edges = int(np.count_nonzero(self.kernel))
        return f"WeightedGraph({self.size} vertices, {n_edges} directed edges)"

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.vertices == other.vertices and np.array_equal(self.kernel, other.kernel)

    def __hash__(self) -> int:
        return hash(self.digest())

    def function(self, values) -> np.ndarray:
        """Turn a mapping ``vertex -> value`` (or a sequence) into an aligned array."""
        if isinstance(values, Mapping):
            if set(values) != set(self.vertices):
                raise GraphError("vertex function must be defined on every vertex")
            return np.array([float(values[v]) for v in self.vertices])
        return self.check(values)

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 0 or u.shape[-1] != self.size:
            raise GraphError(
                f"vertex function has trailing size {u.shape[-1] if u.ndim else 0}, "
                f"graph has {self.size} vertices"
            )
        return u

    def degree(self, i: int) -> int:
        return len(self.neighbours[i])

    def is_symmetric_support(self) -> bool:
        return bool(np.array_equal(self.kernel > 0, (self.kernel > 0).T))

    def ball(self, i: int, radius: int) -> list[int]:
        """Indices within ``radius`` hops of vertex index ``i`` (out-edges), sorted."""
        dist = _bfs(self, i)
        return sorted(j for j, d in dist.items() if d <= radius)

    def heat_matrix(self, t: float) -> np.ndarray:
        """Dense matrix of ``exp(t L_d)`` (scaling and squaring, cached per t)."""
        t = float(t)
        if t < 0:
            raise ValueError(f"heat semigroup needs t >= 0, got {t}")
        p = self._heat_cache.get(t)
        if p is None:
            p = np.eye(self.size) if t == 0 else scipy.linalg.expm(t * self.laplacian)
            p.setflags(write=False)
            if len(self._heat_cache) < 4096:
                self._heat_cache[t] = p
        return p

    def to_dict(self) -> dict:
        edges = []
        for i, v in enumerate(self.vertices):
            for j in self.neighbours[i]:
                edges.append({"from": v, "to": self.vertices[j], "weight": float(self.kernel[i, j])})
        return {"vertices": list(self.vertices), "edges": edges, "symmetric": False}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


# discrete operators -------------------------------------------------------

def _differences(g: WeightedGraph, u: np.ndarray) -> np.ndarray:
    # D[..., y, z] = u(z) - u(y)
    return u[..., None, :] - u[..., :, None]


def _weighted_rowsum(g: WeightedGraph, values: np.ndarray) -> np.ndarray:
    k = g.kernel
    with np.errstate(invalid="ignore"):
        terms = np.where(k > 0, k * values, 0.0)
    return terms.sum(axis=-1)


def ld_apply(g: WeightedGraph, u) -> np.ndarray:
    """``L_d u(y) = sum_z k(y,z) (u(z) - u(y))``."""
    u = g.check(u)
    return u @ g.laplacian.T


def psi_h(g: WeightedGraph, u, H: Callable = UPSILON) -> np.ndarray:
    """``Psi_H(u)(y) = sum_z k(y,z) H(u(z) - u(y))``."""
    u = g.check(u)
    return _weighted_rowsum(g, H(_differences(g, u)))


def b_h(g: WeightedGraph, u, v, H: Callable = UPSILON_PRIME) -> np.ndarray:
    """``B_H(u,v)(y) = sum_z k(y,z) H(u(z) - u(y)) (v(z) - v(y))``."""
    u = g.check(u)
    v = g.check(v)
    with np.errstate(invalid="ignore"):
        prod = H(_differences(g, u)) * _differences(g, v)
    return _weighted_rowsum(g, prod)


def psi_upsilon(g: WeightedGraph, u) -> np.ndarray:
    return psi_h(g, u, UPSILON)


def psi2_upsilon(g: WeightedGraph, u) -> np.ndarray:
    """``Psi_{2,Upsilon}(u) = (L_d Psi_Upsilon(u) - B_{Upsilon'}(u, L_d u)) / 2``.

    The value at ``y`` only involves ``u`` on the 2-ball of ``y``.
    """
    u = g.check(u)
    return 0.5 * (ld_apply(g, psi_upsilon(g, u)) - b_h(g, u, ld_apply(g, u), UPSILON_PRIME))


def gamma_graph(g: WeightedGraph, u, v=None) -> np.ndarray:
    """Carre du champ of ``L_d``: ``(1/2) sum_z k(y,z)(u(z)-u(y))(v(z)-v(y))``."""
    v = u if v is None else v
    return 0.5 * b_h(g, u, v, NamedFunction("identity", lambda x: x))


def gamma2_graph(g: WeightedGraph, u) -> np.ndarray:
    """Iterated carre du champ ``(L_d Gamma(u) - 2 Gamma(u, L_d u)) / 2``."""
    lu = ld_apply(g, u)
    return 0.5 * (ld_apply(g, gamma_graph(g, u)) - 2.0 * gamma_graph(g, u, lu))


def heat_semigroup_apply(g: WeightedGraph, t: float, u) -> np.ndarray:
    """Return ``exp(t L_d) u`` along the last axis of ``u``."""
    u = g.check(u)
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    if t == 0:
        return u.copy()
    return u @ g.heat_matrix(t).T


# structure ----------------------------------------------------------------

def _bfs(g: WeightedGraph, source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        a = queue.popleft()
        for b in g.neighbours[a]:
            if b not in dist:
                dist[b] = dist[a] + 1
                queue.append(b)
    return dist


def graph_distance(g: WeightedGraph, y1, y2) -> int:
    """Number of edges on a shortest path from ``y1`` to ``y2`` in the support of k."""
    try:
        i, j = g.index[y1], g.index[y2]
    except KeyError as exc:
        raise GraphError(f"unknown vertex {exc.args[0]!r}") from None
    dist = _bfs(g, i)
    if j not in dist:
        raise UnreachableError(f"{y2!r} is not reachable from {y1!r}")
    return dist[j]


def k_min(g: WeightedGraph) -> float:
    """Smallest strictly positive weight."""
    pos = g.kernel[g.kernel > 0]
    if pos.size == 0:
        raise GraphError("graph has no edges, k_min is undefined")
    return float(pos.min())


@dataclass(frozen=True)
class GraphValidationReport:
    connected: bool
    symmetric_support: bool
    symmetric_weights: bool
    regular_degree: int | None
    k_min: float | None
    unweighted: bool
    finite: bool = True

    def to_dict(self) -> dict:
        return {
            "connected": self.connected,
            "symmetric_support": self.symmetric_support,
            "symmetric_weights": self.symmetric_weights,
            "regular_degree": self.regular_degree,
            "k_min": self.k_min,
            "unweighted": self.unweighted,
            "finite": self.finite,
        }


def validate(g: WeightedGraph) -> GraphValidationReport:
    """Collect the structural hypotheses used by the curvature and Harnack results.

    ``connected`` means strongly connected along positive weights. Only finite
    graphs are representable, which the ``finite`` flag records.
    """
    k = g.kernel
    m = g.size
    forward = _bfs(g, 0)
    rev = WeightedGraph(g.vertices, k.T) if m else g
    backward = _bfs(rev, 0)
    connected = len(forward) == m and len(backward) == m
    sym_support = g.is_symmetric_support()
    sym_weights = bool(np.array_equal(k, k.T))
    pos = k[k > 0]
    unweighted = bool(pos.size > 0 and np.all(pos == 1.0))
    degrees = {g.degree(i) for i in range(m)}
    regular = degrees.pop() if (len(degrees) == 1 and unweighted and sym_support) else None
    return GraphValidationReport(
        connected=connected,
        symmetric_support=sym_support,
        symmetric_weights=sym_weights,
        regular_degree=regular,
        k_min=float(pos.min()) if pos.size else None,
        unweighted=unweighted,
    )


# file format --------------------------------------------------------------

def graph_from_dict(data: Mapping) -> WeightedGraph:
    unknown = set(data) - {"vertices", "edges", "symmetric"}
    if unknown:
        raise GraphError(f"unknown graph fields: {sorted(unknown)}")
    try:
        vertices = list(data["vertices"])
        edges = data.get("edges", [])
    except KeyError as exc:
        raise GraphError(f"graph file misses field {exc.args[0]!r}") from None
    symmetric = bool(data.get("symmetric", False))
    triples = []
    for e in edges:
        try:
            w = float(e.get("weight", 1.0))
            triples.append((e["from"], e["to"], w))
        except (KeyError, TypeError, ValueError):
            raise GraphError(f"malformed edge entry {e!r}") from None
        if w < 0:
            raise GraphError(f"negative weight on edge {e!r}")
    return WeightedGraph.from_edges(vertices, triples, symmetric=symmetric)


def load_graph(path) -> WeightedGraph:
    with open(path) as fh:
        return graph_from_dict(json.load(fh))


def dump_graph(g: WeightedGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# standard examples --------------------------------------------------------

def two_point(eta: float = 1.0) -> WeightedGraph:
    return WeightedGraph.from_edges(["y1", "y2"], [("y1", "y2", eta)])


def complete(m: int, weight: float = 1.0) -> WeightedGraph:
    names = [f"y{i + 1}" for i in range(m)]
    return WeightedGraph.from_edges(
        names, [(names[i], names[j], weight) for i in range(m) for j in range(i + 1, m)]
    )


def cycle(m: int) -> WeightedGraph:
    names = [f"y{i + 1}" for i in range(m)]
    return WeightedGraph.from_edges(names, [(names[i], names[(i + 1) % m], 1.0) for i in range(m)])


def square() -> WeightedGraph:
    """The 4-cycle: ``k(y_i, y_j) = 1`` iff ``|i - j|`` is 1 or 3."""
    return cycle(4)


def complete_bipartite(a: int, b: int) -> WeightedGraph:
    left = [f"a{i + 1}" for i in range(a)]
    right = [f"b{j + 1}" for j in range(b)]
    return WeightedGraph.from_edges(left + right, [(p, q, 1.0) for p in left for q in right])


def path(m: int, labels: Sequence[Hashable] | None = None) -> WeightedGraph:
    names = list(labels) if labels is not None else [f"y{i + 1}" for i in range(m)]
    return WeightedGraph.from_edges(names, [(names[i], names[i + 1], 1.0) for i in range(m - 1)])


def integer_ball(radius: int = 2) -> WeightedGraph:
    """Vertices ``-radius .. radius`` of the lattice Z with nearest-neighbour edges."""
    labels = list(range(-radius, radius + 1))
    return path(len(labels), labels)


def star(leaves: int) -> WeightedGraph:
    names = ["c"] + [f"l{i + 1}" for i in range(leaves)]
    return WeightedGraph.from_edges(names, [("c", leaf, 1.0) for leaf in names[1:]])


__all__ += ["graph_from_dict", "integer_ball"]
