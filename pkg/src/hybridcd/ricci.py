"""Ricci-flatness certificates for unweighted regular graphs.

A D-regular graph is Ricci-flat at ``x`` when there are maps
``eta_1 .. eta_D : N(x) -> Y`` (``N(x)`` the closed neighbourhood) with

  (i)   ``eta_i(y) ~ y``,
  (ii)  ``eta_i(y) != eta_j(y)`` for ``i != j``,
  (iii) ``{eta_i(eta_j(x))}_j == {eta_j(eta_i(x))}_j`` for every ``i``.

Property (iii) is compared as multisets by default, which is what the
summation identity of the structural lemma needs; ``interpretation="set"``
selects the plain set reading.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .graph import GraphError, WeightedGraph, validate

__all__ = [
    "RicciCertificate",
    "RicciSearchResult",
    "Verification",
    "certify_at",
    "certify",
    "verify_certificate",
    "certificate_to_dict",
    "certificate_from_dict",
    "dump_certificates",
    "load_certificates",
]

DEFAULT_BUDGET = 10**7


@dataclass(frozen=True)
class RicciCertificate:
    """Maps ``eta_i`` on the closed neighbourhood of ``vertex``.

    ``maps[y]`` is the tuple ``(eta_1(y), .., eta_D(y))``.
    """

    vertex: object
    degree: int
    maps: dict

    def eta(self, i: int, y):
        return self.maps[y][i]


@dataclass
class RicciSearchResult:
    vertex: object
    status: str  # "certified" | "not_ricci_flat" | "inconclusive"
    certificate: RicciCertificate | None
    nodes: int
    interpretation: str = "multiset"

    def to_dict(self) -> dict:
        return {
            "vertex": self.vertex,
            "status": self.status,
            "nodes": self.nodes,
            "interpretation": self.interpretation,
            "certificate": certificate_to_dict(self.certificate) if self.certificate else None,
        }


def _clause_iii(maps: dict, x, D: int, interpretation: str):
    """Return the first index ``i`` violating (iii), or ``None``."""
    bag = Counter if interpretation == "multiset" else frozenset
    for i in range(D):
        lhs = bag(maps[maps[x][j]][i] for j in range(D))
        rhs = bag(maps[maps[x][i]][j] for j in range(D))
        if lhs != rhs:
            return i
    return None


def _require_unweighted(g: WeightedGraph):
    pos = g.kernel[g.kernel > 0]
    if pos.size == 0 or not np.all(pos == 1.0):
        raise GraphError("Ricci-flatness is defined for unweighted graphs (weights in {0, 1})")
    if not g.is_symmetric_support() or not np.array_equal(g.kernel, g.kernel.T):
        raise GraphError("Ricci-flatness needs a symmetric kernel")


def certify_at(
    g: WeightedGraph,
    x,
    budget: int = DEFAULT_BUDGET,
    interpretation: str = "multiset",
) -> RicciSearchResult:
    """Backtracking search for a Ricci-flat certificate at ``x``.

    Rows ``(eta_1(y), .., eta_D(y))`` are permutations of the neighbours of
    ``y``, which enforces (i) and (ii); rows are filled for ``y`` in ``N(x)``
    in graph order with permutations in lexicographic vertex order, and (iii)
    is tested once every row is present. Only ``N(x)`` needs to be
    ``D``-regular, so finite balls of infinite regular graphs are accepted.
    """
    if interpretation not in ("multiset", "set"):
        raise ValueError(f"unknown interpretation {interpretation!r}")
    _require_unweighted(g)
    xi = g.index[x]
    D = g.degree(xi)
    closed = sorted({xi, *g.neighbours[xi]})
    for j in closed:
        if g.degree(j) != D:
            raise GraphError(
                f"not regular: vertex {g.vertices[j]!r} has degree {g.degree(j)}, "
                f"{x!r} has degree {D}"
            )
    rows = [g.vertices[j] for j in closed]
    options = [list(permutations([g.vertices[k] for k in g.neighbours[j]])) for j in closed]
    maps: dict = {}
    nodes = 0
    found = None

    def search(level: int) -> bool:
        nonlocal nodes, found
        if level == len(rows):
            if _clause_iii(maps, x, D, interpretation) is None:
                found = dict(maps)
                return True
            return False
        for perm in options[level]:
            nodes += 1
            if nodes > budget:
                return False
            maps[rows[level]] = perm
            if search(level + 1):
                return True
        maps.pop(rows[level], None)
        return False

    ok = search(0)
    if ok:
        cert = RicciCertificate(vertex=x, degree=D, maps={y: tuple(found[y]) for y in rows})
        return RicciSearchResult(x, "certified", cert, nodes, interpretation)
    status = "inconclusive" if nodes > budget else "not_ricci_flat"
    return RicciSearchResult(x, status, None, min(nodes, budget), interpretation)


def certify(
    g: WeightedGraph, budget: int = DEFAULT_BUDGET, interpretation: str = "multiset"
) -> dict:
    """Run :func:`certify_at` at every vertex of a regular graph.

    The graph is Ricci-flat iff every entry has status ``"certified"``.
    """
    _require_unweighted(g)
    rep = validate(g)
    if rep.regular_degree is None:
        raise GraphError("not regular: Ricci-flatness needs a D-regular graph")
    return {y: certify_at(g, y, budget, interpretation) for y in g.vertices}


@dataclass
class Verification:
    ok: bool
    clause: str | None = None
    detail: str = ""
    checks: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def verify_certificate(
    g: WeightedGraph,
    cert: RicciCertificate,
    trials: int = 1000,
    seed: int = 0,
    interpretation: str = "multiset",
) -> Verification:
    """Independently re-check a certificate.

    Besides (i)-(iii) this tests the two consequences of Ricci-flatness: the
    summation identity ``sum_j u(eta_i(eta_j(x))) = sum_j u(eta_j(eta_i(x)))``
    on ``trials`` random functions and on every indicator function, and the
    existence of a permutation ``i -> i*`` with ``eta_i(eta_{i*}(x)) = x``.
    """
    x, D, maps = cert.vertex, cert.degree, cert.maps
    checks = []
    if x not in g.index:
        return Verification(False, "domain", f"{x!r} is not a vertex")
    xi = g.index[x]
    closed = {g.vertices[j] for j in (xi, *g.neighbours[xi])}
    if set(maps) != closed:
        return Verification(False, "domain", "maps are not defined exactly on N(x)")
    if g.degree(xi) != D or any(len(maps[y]) != D for y in maps):
        return Verification(False, "degree", "map count differs from the degree")

    def adjacent(a, b):
        return a in g.index and g.kernel[g.index[a], g.index[b]] > 0

    for y, row in maps.items():
        for i, z in enumerate(row):
            if z not in g.index or not adjacent(y, z):
                return Verification(False, "(i)", f"eta_{i + 1}({y!r}) = {z!r} is not a neighbour")
    checks.append("(i)")
    for y, row in maps.items():
        if len(set(row)) != len(row):
            return Verification(False, "(ii)", f"repeated image in the row of {y!r}")
    checks.append("(ii)")
    bad = _clause_iii(maps, x, D, interpretation)
    if bad is not None:
        return Verification(False, "(iii)", f"commutation fails for i = {bad + 1}")
    checks.append("(iii)")

    idx = g.index
    lhs = np.zeros((D, len(g)))
    rhs = np.zeros((D, len(g)))
    for i in range(D):
        for j in range(D):
            lhs[i, idx[maps[maps[x][j]][i]]] += 1
            rhs[i, idx[maps[maps[x][i]][j]]] += 1
    # indicator basis: the identity for every u is equivalent to equal counts
    if not np.array_equal(lhs, rhs):
        return Verification(False, "lemma (i)", "indicator-basis sums differ", checks)
    rng = np.random.default_rng(seed)
    us = rng.standard_normal((trials, len(g)))
    diff = us @ (lhs - rhs).T
    scale = np.abs(us) @ (lhs + rhs).T + 1.0
    if np.any(np.abs(diff) > 1e-12 * scale):
        return Verification(False, "lemma (i)", "random-function sums differ", checks)
    checks.append("lemma (i)")

    star = []
    for i in range(D):
        hits = [j for j in range(D) if maps[maps[x][j]][i] == x]
        if len(hits) != 1:
            return Verification(False, "lemma (ii)", f"i* for i = {i + 1} is not unique", checks)
        star.append(hits[0])
    if sorted(star) != list(range(D)):
        return Verification(False, "lemma (ii)", "i -> i* is not a permutation", checks)
    checks.append("lemma (ii)")
    return Verification(True, None, "", checks)


# serialisation ------------------------------------------------------------

def certificate_to_dict(cert: RicciCertificate) -> dict:
    return {
        "vertex": cert.vertex,
        "degree": cert.degree,
        "maps": [[y, list(row)] for y, row in cert.maps.items()],
    }


def certificate_from_dict(data: dict) -> RicciCertificate:
    maps = {}
    for y, row in data["maps"]:
        maps[y] = tuple(row)
    return RicciCertificate(vertex=data["vertex"], degree=int(data["degree"]), maps=maps)


def dump_certificates(results: dict, path) -> None:
    payload = {"results": [r.to_dict() for r in results.values()]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_certificates(path) -> list[RicciCertificate]:
    with open(path) as fh:
        payload = json.load(fh)
    return [
        certificate_from_dict(r["certificate"]) for r in payload["results"] if r["certificate"]
    ]
