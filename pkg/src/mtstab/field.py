"""Piecewise linear scalar fields on graph 1-skeletons.

Only the 1-skeleton is stored: superlevel-set connectivity of a PL field is
determined by vertices and edges alone, which is all the split tree needs.
Vertex values must be pairwise distinct; generators are expected to jitter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import (
    DimensionError,
    DisconnectedDomainError,
    DuplicateValueError,
    LengthMismatchError,
    UnknownVertexError,
    ValidationError,
)

#: Single absolute tolerance for every scalar comparison in the package.
TOLERANCE = 1e-9


@dataclass(frozen=True)
class Domain1Skeleton:
    """Connected graph on dense 0-based vertex ids; edges normalized (lo, hi)."""

    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set

    @property
    def _edge_set(self):
        return frozenset(self.edges)


def build_domain(vertex_count: int, edges) -> Domain1Skeleton:
    """Validate and normalize an edge list into a Domain1Skeleton."""
    seen = set()
    for u, v in edges:
        if u == v:
            raise ValidationError(f"self-loop at vertex {u}")
        if not (0 <= u < vertex_count and 0 <= v < vertex_count):
            raise UnknownVertexError(f"edge ({u},{v}) outside 0..{vertex_count - 1}")
        e = (min(u, v), max(u, v))
        if e in seen:
            raise ValidationError(f"duplicate edge {e}")
        seen.add(e)
    norm = tuple(sorted(seen))
    adj = [[] for _ in range(vertex_count)]
    for u, v in norm:
        adj[u].append(v)
        adj[v].append(u)
    dom = Domain1Skeleton(vertex_count, norm, tuple(tuple(sorted(a)) for a in adj))
    if not _connected(dom):
        raise DisconnectedDomainError("domain 1-skeleton is not connected")
    return dom


def _connected(dom: Domain1Skeleton) -> bool:
    if dom.vertex_count == 0:
        return False
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in dom.adjacency[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == dom.vertex_count


def build_grid_domain(rows: int, cols: int) -> Domain1Skeleton:
    """1-skeleton of a triangulated grid: 4-neighbor edges plus the
    (r,c)-(r+1,c+1) diagonal of every cell."""
    if rows < 2 or cols < 2:
        raise DimensionError(f"grid must be at least 2x2, got {rows}x{cols}")
    edges = []
    vid = lambda r, c: r * cols + c
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((vid(r, c), vid(r, c + 1)))
            if r + 1 < rows:
                edges.append((vid(r, c), vid(r + 1, c)))
            if r + 1 < rows and c + 1 < cols:
                edges.append((vid(r, c), vid(r + 1, c + 1)))
    return build_domain(rows * cols, edges)


@dataclass(frozen=True)
class ScalarField:
    domain: Domain1Skeleton
    values: tuple[float, ...]

    def value(self, v: int) -> float:
        return self.values[v]

    @property
    def vertex_count(self) -> int:
        return self.domain.vertex_count


@dataclass(frozen=True)
class VertexOrder:
    """rank[v] in 1..n, ascending by scalar value."""

    rank: tuple[int, ...]


def validate_field(domain: Domain1Skeleton, values) -> ScalarField:
    values = tuple(float(x) for x in values)
    if len(values) != domain.vertex_count:
        raise LengthMismatchError(
            f"{len(values)} values for {domain.vertex_count} vertices"
        )
    order = sorted(range(len(values)), key=values.__getitem__)
    for a, b in zip(order, order[1:]):
        if values[a] == values[b]:
            raise DuplicateValueError(a, b, values[a])
    if not _connected(domain):
        raise DisconnectedDomainError("domain 1-skeleton is not connected")
    return ScalarField(domain, values)


def vertex_order(field: ScalarField) -> VertexOrder:
    order = sorted(range(field.vertex_count), key=field.values.__getitem__)
    rank = [0] * field.vertex_count
    for i, v in enumerate(order):
        rank[v] = i + 1
    return VertexOrder(tuple(rank))


def apply_value_change(field: ScalarField, vertex: int, new_value: float) -> ScalarField:
    """Return a copy of the field with one vertex value replaced."""
    if not (0 <= vertex < field.vertex_count):
        raise UnknownVertexError(f"vertex {vertex} not in field")
    new_value = float(new_value)
    for v, x in enumerate(field.values):
        if v != vertex and x == new_value:
            raise DuplicateValueError(vertex, v, new_value)
    values = list(field.values)
    values[vertex] = new_value
    return ScalarField(field.domain, tuple(values))


def superlevel_components(field: ScalarField, threshold: float) -> list[frozenset[int]]:
    """Connected components of the strict superlevel set {v : f(v) > t}.

    Test oracle for merge tree construction; returned sorted by min vertex id.
    """
    alive = {v for v in range(field.vertex_count) if field.values[v] > threshold}
    comps = []
    unseen = set(alive)
    while unseen:
        start = min(unseen)
        comp = {start}
        stack = [start]
        unseen.discard(start)
        while stack:
            v = stack.pop()
            for w in field.domain.adjacency[v]:
                if w in alive and w not in comp:
                    comp.add(w)
                    unseen.discard(w)
                    stack.append(w)
        comps.append(frozenset(comp))
    return sorted(comps, key=min)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def field_to_dict(field: ScalarField) -> dict:
    return {
        "vertices": [{"id": v, "value": field.values[v]} for v in range(field.vertex_count)],
        "edges": [list(e) for e in field.domain.edges],
    }


def field_from_dict(data: dict) -> ScalarField:
    if "grid" in data:
        g = data["grid"]
        dom = build_grid_domain(int(g["rows"]), int(g["cols"]))
        return validate_field(dom, g["values"])
    try:
        verts = data["vertices"]
        edges = data["edges"]
    except KeyError as e:
        raise ValidationError(f"field JSON missing key {e}") from e
    n = len(verts)
    values = [None] * n
    for entry in verts:
        i = int(entry["id"])
        if not (0 <= i < n) or values[i] is not None:
            raise ValidationError(f"vertex ids must be dense 0-based, got {i}")
        values[i] = float(entry["value"])
    dom = build_domain(n, [(int(u), int(v)) for u, v in edges])
    return validate_field(dom, values)


def load_field(path: str) -> ScalarField:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return field_from_dict(data)


def dump_field(field: ScalarField, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(field_to_dict(field), fh, indent=2, sort_keys=True)
        fh.write("\n")
