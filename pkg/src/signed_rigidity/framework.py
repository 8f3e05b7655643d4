"""Frameworks with heterogeneous constraint sets.

A framework is a graph carrying four constraint families (edges, unsigned
angle triples, signed angle triples, signed volume quadruples) together with
a realization ``p`` in R^{dn}.  Indices are 0-based inside the library and
1-based in every file format; :func:`build_framework` and
:meth:`Framework.to_spec` are the only places that convert.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

Edge = tuple[int, int]
Triple = tuple[int, int, int]
Quad = tuple[int, int, int, int]

# Two constrained vertices closer than this (relative to the framework
# diameter) are treated as coincident.
COINCIDENCE_TOL = 1e-12


class FrameworkError(ValueError):
    """Raised when a framework description violates a structural invariant."""


def normalize_edge(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Vertex count plus the four ordered constraint lists (0-based)."""

    n: int
    edges: tuple[Edge, ...] = ()
    angles: tuple[Triple, ...] = ()
    signed_angles: tuple[Triple, ...] = ()
    signed_volumes: tuple[Quad, ...] = ()

    @property
    def m_d(self) -> int:
        return len(self.edges)

    @property
    def m_a(self) -> int:
        return len(self.angles)

    @property
    def m_s(self) -> int:
        return len(self.signed_angles)

    @property
    def m_v(self) -> int:
        return len(self.signed_volumes)

    def constraints(self) -> Iterable[tuple[str, tuple[int, ...]]]:
        """Yield ``(family, indices)`` for every constraint in list order."""
        for e in self.edges:
            yield "edge", e
        for t in self.angles:
            yield "angle", t
        for t in self.signed_angles:
            yield "signed_angle", t
        for q in self.signed_volumes:
            yield "signed_volume", q

    def constrained_pairs(self) -> set[Edge]:
        """Every vertex pair that appears together in some constraint."""
        pairs: set[Edge] = set()
        for _, idx in self.constraints():
            for a in range(len(idx)):
                for b in range(a + 1, len(idx)):
                    pairs.add(normalize_edge(idx[a], idx[b]))
        return pairs


@dataclass(frozen=True, eq=False)
class Framework:
    """A graph with a realization; ``positions`` has shape ``(n, dim)``."""

    graph: Graph
    dim: int
    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def p(self) -> np.ndarray:
        """Stacked realization ``[p_1; ...; p_n]``."""
        return self.positions.reshape(-1)

    def with_positions(self, positions, validate: bool = True) -> "Framework":
        fw = Framework(self.graph, self.dim, np.asarray(positions, float).reshape(self.n, self.dim))
        if validate:
            validate_framework(fw)
        return fw

    def to_spec(self) -> dict:
        """Serialize to the declarative (1-based) form read by :func:`build_framework`."""
        g = self.graph
        return {
            "n": g.n,
            "dim": self.dim,
            "positions": self.positions.tolist(),
            "edges": [[i + 1, j + 1] for i, j in g.edges],
            "angles": [[a + 1 for a in t] for t in g.angles],
            "signed_angles": [[a + 1 for a in t] for t in g.signed_angles],
            "signed_volumes": [[a + 1 for a in q] for q in g.signed_volumes],
        }

    def __eq__(self, other):
        if not isinstance(other, Framework):
            return NotImplemented
        return (self.graph == other.graph and self.dim == other.dim
                and np.array_equal(self.positions, other.positions))

    __hash__ = None


def _check_tuple(idx: Sequence[int], n: int, size: int, what: str) -> tuple[int, ...]:
    if len(idx) != size:
        raise FrameworkError(f"{what} {tuple(idx)} must have {size} indices")
    for a in idx:
        if not isinstance(a, (int, np.integer)) or isinstance(a, bool):
            raise FrameworkError(f"{what} {tuple(idx)} has non-integer index {a!r}")
        if not 0 <= a < n:
            raise FrameworkError(f"{what} {tuple(i + 1 for i in idx)}: index out of range 1..{n}")
    if len(set(idx)) != size:
        raise FrameworkError(f"{what} {tuple(i + 1 for i in idx)} repeats a vertex")
    return tuple(int(a) for a in idx)


def make_graph(n: int, edges=(), angles=(), signed_angles=(), signed_volumes=()) -> Graph:
    """Build a :class:`Graph` from 0-based index lists, validating each entry."""
    if n < 1:
        raise FrameworkError("vertex count must be positive")
    norm_edges = []
    seen = set()
    for e in edges:
        if len(e) == 2 and e[0] == e[1]:
            raise FrameworkError(f"self-loop edge ({e[0] + 1},{e[1] + 1})")
        i, j = _check_tuple(e, n, 2, "edge")
        key = normalize_edge(i, j)
        if key in seen:
            raise FrameworkError(f"duplicate edge ({key[0] + 1},{key[1] + 1})")
        seen.add(key)
        norm_edges.append(key)

    def _unique(items, size, what):
        out, seen_items = [], set()
        for t in items:
            t = _check_tuple(t, n, size, what)
            if t in seen_items:
                raise FrameworkError(f"duplicate {what} {tuple(a + 1 for a in t)}")
            seen_items.add(t)
            out.append(t)
        return tuple(out)

    return Graph(
        n=n,
        edges=tuple(norm_edges),
        angles=_unique(angles, 3, "angle"),
        signed_angles=_unique(signed_angles, 3, "signed angle"),
        signed_volumes=_unique(signed_volumes, 4, "signed volume"),
    )


def validate_framework(fw: Framework) -> None:
    g = fw.graph
    if fw.dim not in (2, 3):
        raise FrameworkError(f"dimension must be 2 or 3, got {fw.dim}")
    if fw.positions.shape != (g.n, fw.dim):
        raise FrameworkError(
            f"positions must have shape ({g.n}, {fw.dim}), got {fw.positions.shape}")
    if not np.all(np.isfinite(fw.positions)):
        raise FrameworkError("positions must be finite")
    if fw.dim == 2 and g.signed_volumes:
        raise FrameworkError("signed volume constraints require dim = 3")
    if fw.dim == 3 and g.signed_angles:
        raise FrameworkError("signed angle constraints require dim = 2")
    P = fw.positions
    scale = max(1.0, float(np.ptp(P, axis=0).max())) if g.n > 1 else 1.0
    for i, j in sorted(g.constrained_pairs()):
        if np.linalg.norm(P[i] - P[j]) <= COINCIDENCE_TOL * scale:
            raise FrameworkError(f"vertices {i + 1} and {j + 1} are coincident")


def build_framework(spec: Mapping) -> Framework:
    """Build and validate a framework from a declarative 1-based description.

    ``spec`` carries ``dim``, ``positions`` and optionally ``n`` and the four
    constraint lists ``edges``, ``angles``, ``signed_angles``,
    ``signed_volumes``.
    """
    positions = np.asarray(spec["positions"], dtype=float)
    if positions.ndim != 2:
        raise FrameworkError("positions must be a list of coordinate vectors")
    n = int(spec.get("n", positions.shape[0]))
    dim = int(spec.get("dim", positions.shape[1]))

    def shift(items):
        return [tuple(int(a) - 1 for a in t) for t in items]

    graph = make_graph(
        n,
        edges=shift(spec.get("edges", [])),
        angles=shift(spec.get("angles", [])),
        signed_angles=shift(spec.get("signed_angles", [])),
        signed_volumes=shift(spec.get("signed_volumes", [])),
    )
    fw = Framework(graph, dim, positions)
    validate_framework(fw)
    return fw


def incidence_matrix(n: int, edge_list: Sequence[Edge]) -> np.ndarray:
    """Oriented incidence matrix, +1 at the smaller index and -1 at the larger."""
    H = np.zeros((len(edge_list), n))
    for s, (i, j) in enumerate(edge_list):
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise FrameworkError(f"invalid edge ({i + 1},{j + 1}) for n={n}")
        a, b = normalize_edge(i, j)
        H[s, a] = 1.0
        H[s, b] = -1.0
    return H


def relative_positions(fw: Framework, edge_list: Sequence[Edge]) -> np.ndarray:
    """Rows ``z_s = p_i - p_j`` oriented like :func:`incidence_matrix`."""
    if not len(edge_list):
        return np.zeros((0, fw.dim))
    e = np.array([normalize_edge(i, j) for i, j in edge_list])
    return fw.positions[e[:, 0]] - fw.positions[e[:, 1]]


def _dedup(pairs: Iterable[Edge]) -> list[Edge]:
    out, seen = [], set()
    for i, j in pairs:
        key = normalize_edge(i, j)
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def induced_edges(graph: Graph, families: Sequence[str]) -> list[Edge]:
    """The induced edge set: real edges plus the rays used by angle-type constraints.

    ``families`` selects which of ``"edge"``, ``"angle"``, ``"signed_angle"``,
    ``"signed_volume"`` contribute.  Order is first appearance.
    """
    pairs: list[Edge] = []
    for fam, idx in graph.constraints():
        if fam not in families:
            continue
        if fam == "edge":
            pairs.append(idx)
        else:
            pairs.extend((idx[0], other) for other in idx[1:])
    return _dedup(pairs)


def sensing_topology(graph: Graph) -> list[Edge]:
    """Undirected sensing graph: every constraint contributes the clique on its vertices."""
    pairs = []
    for _, idx in graph.constraints():
        pairs.extend((idx[a], idx[b]) for a in range(len(idx)) for b in range(a + 1, len(idx)))
    return _dedup(pairs)
