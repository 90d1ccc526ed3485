"""Shared test utilities: random generators, canonical tree comparison and
an independent sequence-search oracle for the deformation distances."""

from __future__ import annotations

import heapq
import itertools
import random

from mtstab.editcore import EdgeTree, edge_tree_of
from mtstab.field import build_domain, build_grid_domain, validate_field
from mtstab.mergetree import BLANK, abstract_merge_tree, merge_tree_of


def random_field(rng: random.Random, rows=3, cols=3):
    dom = build_grid_domain(rows, cols)
    while True:
        values = [rng.random() for _ in range(dom.vertex_count)]
        if len(set(values)) == len(values):
            return validate_field(dom, values)


def random_path_field(rng: random.Random, n=5):
    dom = build_domain(n, [(i, i + 1) for i in range(n - 1)])
    while True:
        values = [rng.random() for _ in range(n)]
        if len(set(values)) == len(values):
            return validate_field(dom, values)


def random_abstract_tree(rng: random.Random, max_edges=6):
    """Abstract merge tree of a random small field; resamples until the
    edge budget is met."""
    while True:
        t = merge_tree_of(random_field(rng, 3, 3))
        if t.edge_count() <= max_edges:
            return t


def random_tiny_tree(rng: random.Random, max_edges=3):
    from mtstab.errors import AbstractInvariantError

    while True:
        try:
            t = merge_tree_of(random_path_field(rng, rng.randint(3, 6)))
        except AbstractInvariantError:
            continue  # interior global minimum disconnects a path's superlevel set
        if t.edge_count() <= max_edges:
            return t


def labeled_canonical(lt):
    """Order-insensitive canonical form of a labeled tree."""

    def norm(label):
        if label is BLANK:
            return "blank"
        if isinstance(label, tuple):
            return tuple(round(x, 9) for x in label)
        return round(label, 9)

    def key(v):
        return (norm(lt.labels[v]), tuple(sorted(key(c) for c in lt.children[v])))

    return key(lt.root)


def edge_canonical(et: EdgeTree):
    def key(v):
        own = round(et.length[v], 9) if et.parent[v] is not None else None
        return (own, tuple(sorted(key(c) for c in et.children[v])))

    return key(et.root)


# ---------------------------------------------------------------------------
# Independent oracle: Dijkstra over canonicalized edge trees
# ---------------------------------------------------------------------------

def _frontier_moves(et: EdgeTree, labels, one_degree, counter):
    """All applicable single operations with their costs and results."""
    from mtstab.editcore import EditOp, _apply_edge_op

    moves = []

    def emit(op, cost):
        nxt = et.copy()
        _apply_edge_op(nxt, op)
        moves.append((cost, nxt))
    for v in list(et.length):
        if one_degree and et.children[v]:
            continue
        emit(EditOp("edge_delete", v, et.length[v]), et.length[v])
    for v in list(et.length):
        for t in labels:
            if abs(t - et.length[v]) > 1e-9:
                emit(EditOp("edge_relabel", v, abs(t - et.length[v]), label=t), abs(t - et.length[v]))
    for ell in labels:
        for p in list(et.parent):
            kids = et.children[p]
            subsets = [()] if one_degree else [
                tuple(s) for r in range(len(kids) + 1) for s in itertools.combinations(kids, r)
            ]
            for moved in subsets:
                name = f"n{next(counter)}"
                emit(
                    EditOp("edge_insert", name, ell, label=ell, parent=p, moved_children=moved),
                    ell,
                )
        for e in list(et.length):  # split inserts
            total = et.length[e]
            for lower in labels:
                if lower <= 1e-9 or lower >= total - 1e-9:
                    continue
                name_leaf = f"n{next(counter)}"
                name_inner = f"m{next(counter)}"
                emit(
                    EditOp(
                        "edge_insert",
                        name_leaf,
                        ell,
                        label=ell,
                        parent=name_inner,
                        moved_children=(),
                        split=(e, name_inner, total - lower, lower),
                    ),
                    ell,
                )
    return moves


def _candidate_labels(et1: EdgeTree, et2: EdgeTree):
    """All downward path sums of both trees (achievable merged lengths)."""
    out = set()
    for et in (et1, et2):
        for v in et.length:
            total = 0.0
            cur = v
            while et.parent[cur] is not None:
                total += et.length[cur]
                out.add(round(total, 9))
                cur = et.parent[cur]
    return sorted(out)


def deform_sequence_search(t1, t2, one_degree=False, cost_cap=None, max_extra_nodes=2):
    """Shortest edit-sequence cost from t1 to t2 over deformation operations,
    found by Dijkstra over canonicalized trees. Relabels and insertions are
    restricted to the path-sum label set of the two trees; exact for tiny
    instances whose optimum only needs such labels, which covers every
    normalized plan."""
    et1 = edge_tree_of(t1) if not isinstance(t1, EdgeTree) else t1
    et2 = edge_tree_of(t2) if not isinstance(t2, EdgeTree) else t2
    labels = _candidate_labels(et1, et2)
    goal = edge_canonical(et2)
    max_nodes = max(len(et1.parent), len(et2.parent)) + max_extra_nodes
    start = et1.copy()
    dist = {edge_canonical(start): 0.0}
    heap = [(0.0, 0, start)]
    counter = itertools.count(1)
    names = itertools.count()
    while heap:
        d, _, et = heapq.heappop(heap)
        key = edge_canonical(et)
        if key == goal:
            return d
        if d > dist.get(key, float("inf")) + 1e-12:
            continue
        for cost, nxt in _frontier_moves(et, labels, one_degree, names):
            nd = d + cost
            if cost_cap is not None and nd > cost_cap + 1e-9:
                continue
            if len(nxt.parent) > max_nodes:
                continue
            k = edge_canonical(nxt)
            if nd < dist.get(k, float("inf")) - 1e-12:
                dist[k] = nd
                heapq.heappush(heap, (nd, next(counter), nxt))
    return float("inf")
