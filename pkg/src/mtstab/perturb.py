"""Minimal vertex perturbations: generation, classification, decomposition.

A minimal vertex perturbation changes exactly one vertex value and swaps it
with at most one other vertex in the global value order. The classifier
sorts a field pair into the taxonomy simple change / edge split / vertical
swap / ordered or unordered horizontal swap via subtree-inclusion tests on
the merge trees and their (ordered) branch decomposition trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import DomainMismatchError, NotMinimalError
from .field import ScalarField, apply_value_change, build_domain, validate_field
from .mergetree import (
    bdt_included_up_to_iso,
    build_bdt,
    build_obdt,
    merge_tree_of,
    persistence_branch_decomposition,
    tree_included_up_to_iso,
)


class ChangeClass(Enum):
    SIMPLE_CHANGE = "SimpleChange"
    EDGE_SPLIT = "EdgeSplit"
    VERTICAL_SWAP = "VerticalSwap"
    ORDERED_HORIZONTAL_SWAP = "OrderedHorizontalSwap"
    UNORDERED_HORIZONTAL_SWAP = "UnorderedHorizontalSwap"

    @property
    def is_horizontal(self) -> bool:
        return self in (
            ChangeClass.ORDERED_HORIZONTAL_SWAP,
            ChangeClass.UNORDERED_HORIZONTAL_SWAP,
        )


@dataclass(frozen=True)
class MinimalPerturbation:
    vertex: int | None
    old_value: float | None
    new_value: float | None
    swap_partner: int | None
    direction: str  # "up" | "down" | "none"

    @property
    def extent(self) -> float:
        if self.vertex is None:
            return 0.0
        return abs(self.new_value - self.old_value)


def _same_domain(f: ScalarField, f2: ScalarField) -> bool:
    return (
        f.domain.vertex_count == f2.domain.vertex_count
        and f.domain.edges == f2.domain.edges
    )


def check_minimal(f: ScalarField, f2: ScalarField) -> MinimalPerturbation:
    """Verify the two fields differ by a minimal vertex perturbation.

    Exactly one vertex value may differ, and the value orders must either
    agree or differ by one adjacent transposition. The identity (no change)
    counts as the degenerate extent-0 case.
    """
    if not _same_domain(f, f2):
        raise DomainMismatchError("fields live on different domains")
    diffs = [v for v in range(f.vertex_count) if f.values[v] != f2.values[v]]
    if not diffs:
        return MinimalPerturbation(None, None, None, None, "none")
    if len(diffs) > 1:
        raise NotMinimalError(f"{len(diffs)} vertex values differ: {diffs}")
    (x,) = diffs
    order1 = sorted(range(f.vertex_count), key=f.values.__getitem__)
    order2 = sorted(range(f.vertex_count), key=f2.values.__getitem__)
    rank1 = {v: i for i, v in enumerate(order1)}
    rank2 = {v: i for i, v in enumerate(order2)}
    moved = [v for v in range(f.vertex_count) if rank1[v] != rank2[v]]
    direction = "up" if f2.values[x] > f.values[x] else "down"
    if not moved:
        return MinimalPerturbation(x, f.values[x], f2.values[x], None, direction)
    if len(moved) != 2 or x not in moved:
        raise NotMinimalError(f"vertex order changed at {moved}, not one transposition")
    y = moved[0] if moved[1] == x else moved[1]
    if abs(rank1[x] - rank1[y]) != 1 or rank1[x] != rank2[y] or rank1[y] != rank2[x]:
        raise NotMinimalError(f"vertices {x} and {y} do not swap adjacent ranks")
    return MinimalPerturbation(x, f.values[x], f2.values[x], y, direction)


def enumerate_minimal_perturbations(field: ScalarField, vertex: int) -> list[MinimalPerturbation]:
    """Up to four candidates for one vertex: move up/down without crossing
    (midpoint toward the rank neighbor) and swap with the rank successor or
    predecessor (landing halfway to the next-but-one value, so a swap never
    crosses two vertices)."""
    order = sorted(range(field.vertex_count), key=field.values.__getitem__)
    pos = order.index(vertex)
    val = field.values[vertex]
    succ = field.values[order[pos + 1]] if pos + 1 < len(order) else None
    succ2 = field.values[order[pos + 2]] if pos + 2 < len(order) else None
    pred = field.values[order[pos - 1]] if pos - 1 >= 0 else None
    pred2 = field.values[order[pos - 2]] if pos - 2 >= 0 else None
    candidates = []

    def add(new_value, partner, direction):
        f2 = apply_value_change(field, vertex, new_value)
        p = check_minimal(field, f2)
        assert p.swap_partner == partner and p.direction == direction
        candidates.append(p)

    add((val + succ) / 2 if succ is not None else val + 1.0, None, "up")
    add((val + pred) / 2 if pred is not None else val - 1.0, None, "down")
    if succ is not None:
        target = (succ + succ2) / 2 if succ2 is not None else succ + 1.0
        add(target, order[pos + 1], "up")
    if pred is not None:
        target = (pred + pred2) / 2 if pred2 is not None else pred - 1.0
        add(target, order[pos - 1], "down")
    return candidates


def apply_perturbation(field: ScalarField, p: MinimalPerturbation) -> ScalarField:
    if p.vertex is None:
        return field
    return apply_value_change(field, p.vertex, p.new_value)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    change_class: ChangeClass
    perturbation: MinimalPerturbation
    tree_included: bool
    obdt_included: bool
    bdt_included: bool | None  # computed only for horizontal swaps


def classify_change(f: ScalarField, f2: ScalarField) -> ChangeClass:
    return classify_change_detailed(f, f2).change_class


def classify_change_detailed(f: ScalarField, f2: ScalarField) -> Classification:
    """Sort a minimal vertex perturbation into the four-type taxonomy.

    Inclusion tests run up to renaming of the perturbed vertex and its swap
    partner (they may change identity between the two trees); all other
    nodes must match in id and value.
    """
    p = check_minimal(f, f2)
    exempt = frozenset(v for v in (p.vertex, p.swap_partner) if v is not None)
    t1, t2 = merge_tree_of(f), merge_tree_of(f2)
    bd1, bd2 = persistence_branch_decomposition(t1), persistence_branch_decomposition(t2)
    o1, o2 = build_obdt(bd1), build_obdt(bd2)

    def both_ways(check, a, b, **kw):
        return check(a, b, exempt1=exempt, exempt2=exempt, **kw) or check(
            b, a, exempt1=exempt, exempt2=exempt, **kw
        )

    tree_inc = both_ways(tree_included_up_to_iso, t1, t2)
    obdt_inc = both_ways(lambda a, b, **kw: bdt_included_up_to_iso(a, b, True, **kw), o1, o2)
    if tree_inc and obdt_inc:
        cls = ChangeClass.SIMPLE_CHANGE
    elif tree_inc:
        cls = ChangeClass.VERTICAL_SWAP
    elif obdt_inc:
        cls = ChangeClass.EDGE_SPLIT
    else:
        b1, b2 = build_bdt(bd1), build_bdt(bd2)
        bdt_inc = both_ways(lambda a, b, **kw: bdt_included_up_to_iso(a, b, False, **kw), b1, b2)
        cls = (
            ChangeClass.ORDERED_HORIZONTAL_SWAP
            if bdt_inc
            else ChangeClass.UNORDERED_HORIZONTAL_SWAP
        )
        return Classification(cls, p, tree_inc, obdt_inc, bdt_inc)
    return Classification(cls, p, tree_inc, obdt_inc, None)


# ---------------------------------------------------------------------------
# Scenario suite: one constructed instance per named perturbation case
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    field: ScalarField
    perturbed: ScalarField
    expected: ChangeClass
    distance_zero: bool = False  # tree and labels unchanged: all metrics 0


def _field(n, edges, values) -> ScalarField:
    return validate_field(build_domain(n, edges), values)


def _scenario(name, n, edges, values, vertex, new_value, expected, distance_zero=False):
    f = _field(n, edges, values)
    f2 = apply_value_change(f, vertex, new_value)
    check_minimal(f, f2)
    return Scenario(name, f, f2, expected, distance_zero)


def scenario_suite() -> list[Scenario]:
    """Hand-built fields realizing every named case of the perturbation
    case distinction that yields a well-defined class.

    Vertex 1 is the perturbed vertex x in the pass-a-neighbor cases; the
    layouts control which components stay adjacent to x after the move.
    """
    path3 = [(0, 1), (1, 2)]
    path4 = [(0, 1), (1, 2), (2, 3)]
    s = []
    # perturbations without any transposition
    s.append(_scenario("regular_moves", 3, path3, [0, 1, 2], 1, 1.5,
                       ChangeClass.SIMPLE_CHANGE, distance_zero=True))
    s.append(_scenario("minimum_moves", 3, path3, [0, 1, 2], 0, 0.5,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("saddle_moves", 4, [(0, 1), (1, 2), (1, 3)], [0, 1, 3, 4], 1, 1.5,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("maximum_moves", 3, path3, [0, 1, 2], 2, 3.0,
                       ChangeClass.SIMPLE_CHANGE))
    # transpositions of non-neighbors (in the augmented tree)
    s.append(_scenario("regular_passes_nonneighbor", 5,
                       [(0, 1), (0, 2), (1, 2), (1, 3), (2, 4)],
                       [0, 1, 2, 3, 4], 2, 3.5,
                       ChangeClass.SIMPLE_CHANGE, distance_zero=True))
    s.append(_scenario("saddle_passes_nonneighbor", 8,
                       [(0, 1), (1, 2), (1, 3), (2, 4), (2, 5), (3, 6), (3, 7)],
                       [0, 0.5, 1.0, 1.1, 2, 3, 4, 5], 2, 1.15,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("maximum_passes_maximum_parent_branch", 6,
                       [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
                       [0, 4.1, 1, 4.0, 2, 3], 3, 4.2,
                       ChangeClass.VERTICAL_SWAP))
    s.append(_scenario("maximum_passes_maximum_sibling_branch", 6,
                       [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)],
                       [0, 0.5, 2, 1, 2.1, 4], 2, 2.15,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("maximum_passes_regular_nonneighbor", 5,
                       [(0, 1), (1, 2), (0, 3), (3, 4), (1, 3)],
                       [0, 1, 1.4, 1.5, 3], 2, 1.7,
                       ChangeClass.SIMPLE_CHANGE))
    # minimum passes its neighbor
    s.append(_scenario("minimum_passes_neighbor", 3, [(0, 1), (1, 2), (0, 2)],
                       [0, 1, 2], 0, 1.5,
                       ChangeClass.SIMPLE_CHANGE))
    # regular vertex passes a neighbor
    s.append(_scenario("regular_passes_regular_child_stays", 4, path4,
                       [0, 1, 2, 3], 1, 2.5,
                       ChangeClass.EDGE_SPLIT))
    s.append(_scenario("regular_passes_regular_child_moves", 4,
                       path4 + [(1, 3)], [0, 1, 2, 3], 1, 2.5,
                       ChangeClass.SIMPLE_CHANGE, distance_zero=True))
    s.append(_scenario("regular_passes_maximum", 3, path3, [0, 1, 2], 1, 2.5,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("regular_passes_saddle_all_children", 5,
                       [(0, 1), (1, 2), (2, 3), (2, 4), (1, 3), (1, 4)],
                       [0, 1, 2, 3, 4], 1, 2.5,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("regular_passes_saddle_no_children", 5,
                       [(0, 1), (1, 2), (2, 3), (2, 4)],
                       [0, 1, 2, 3, 4], 1, 2.5,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("regular_passes_saddle_one_child", 5,
                       [(0, 1), (1, 2), (2, 3), (2, 4), (1, 3)],
                       [0, 1, 2, 3, 4], 1, 2.5,
                       ChangeClass.SIMPLE_CHANGE, distance_zero=True))
    s.append(_scenario("regular_passes_saddle_some_children", 6,
                       [(0, 1), (1, 2), (2, 3), (2, 4), (2, 5), (1, 3), (1, 4)],
                       [0, 1, 2, 3, 4, 5], 1, 2.5,
                       ChangeClass.UNORDERED_HORIZONTAL_SWAP))
    s.append(_scenario("regular_passes_saddle_some_children_ordered", 6,
                       [(0, 1), (1, 2), (2, 3), (2, 4), (2, 5), (1, 3), (1, 4)],
                       [0, 1, 2, 5, 4, 3], 1, 2.5,
                       ChangeClass.ORDERED_HORIZONTAL_SWAP))
    # saddle vertex passes a neighbor
    s.append(_scenario("saddle_passes_regular_child_stays_ordered", 6,
                       [(0, 1), (1, 2), (2, 3), (1, 4), (1, 5)],
                       [0, 1, 1.5, 3, 4, 5], 1, 1.7,
                       ChangeClass.ORDERED_HORIZONTAL_SWAP))
    s.append(_scenario("saddle_passes_regular_child_stays_unordered", 6,
                       [(0, 1), (1, 2), (2, 3), (1, 4), (1, 5)],
                       [0, 1, 1.5, 5, 3, 4], 1, 1.7,
                       ChangeClass.UNORDERED_HORIZONTAL_SWAP))
    s.append(_scenario("saddle_passes_regular_one_child_left", 5,
                       [(0, 1), (1, 2), (2, 3), (1, 4)],
                       [0, 1, 1.5, 3, 4], 1, 1.7,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("saddle_passes_regular_child_moves", 5,
                       [(0, 1), (1, 2), (2, 3), (1, 3), (1, 4)],
                       [0, 1, 1.5, 3, 4], 1, 1.7,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("saddle_passes_maximum_two_children_left", 5,
                       [(0, 1), (1, 2), (1, 3), (1, 4)],
                       [0, 1, 1.5, 3, 4], 1, 2.0,
                       ChangeClass.SIMPLE_CHANGE))
    s.append(_scenario("saddle_passes_maximum_one_child_left", 4,
                       [(0, 1), (1, 2), (1, 3)],
                       [0, 1, 1.5, 3], 1, 2.0,
                       ChangeClass.EDGE_SPLIT))
    s.append(_scenario("saddle_passes_saddle_all_move", 6,
                       [(0, 1), (1, 2), (2, 3), (2, 4), (1, 3), (1, 4), (1, 5)],
                       [0, 1, 2, 5, 6, 7], 1, 2.2,
                       ChangeClass.UNORDERED_HORIZONTAL_SWAP))
    s.append(_scenario("saddle_passes_saddle_all_move_ordered", 6,
                       [(0, 1), (1, 2), (2, 3), (2, 4), (1, 3), (1, 4), (1, 5)],
                       [0, 1, 2, 5, 7, 6], 1, 2.2,
                       ChangeClass.ORDERED_HORIZONTAL_SWAP))
    s.append(_scenario("saddle_passes_saddle_some_stay", 7,
                       [(0, 1), (1, 2), (2, 3), (2, 4), (1, 5), (1, 6)],
                       [0, 1, 2, 5, 6, 7, 8], 1, 2.2,
                       ChangeClass.UNORDERED_HORIZONTAL_SWAP))
    s.append(_scenario("saddle_passes_saddle_all_stay", 6,
                       [(0, 1), (1, 2), (2, 3), (2, 4), (1, 5)],
                       [0, 1, 2, 5, 6, 7], 1, 2.2,
                       ChangeClass.UNORDERED_HORIZONTAL_SWAP))
    return s


# ---------------------------------------------------------------------------
# Decomposition of arbitrary perturbations into minimal ones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSequence:
    fields: tuple[ScalarField, ...]
    steps: tuple[MinimalPerturbation, ...]  # steps[i]: fields[i] -> fields[i+1]


def decompose_perturbation(f: ScalarField, f2: ScalarField) -> PerturbationSequence:
    """Split an arbitrary perturbation into minimal vertex perturbations
    with no unnecessary transpositions: pairs agreeing in order never swap,
    disagreeing pairs swap exactly once.

    Phase one fixes the vertex order by swapping adjacent inverted pairs
    (one swap per inversion); phase two moves values into place without any
    crossing (down-movers bottom-up, then up-movers top-down).
    """
    if not _same_domain(f, f2):
        raise DomainMismatchError("fields live on different domains")
    fields = [f]
    steps = []
    current = f

    def push(vertex, new_value):
        nonlocal current
        nxt = apply_value_change(current, vertex, new_value)
        steps.append(check_minimal(current, nxt))
        fields.append(nxt)
        current = nxt

    n = f.vertex_count
    target_rank = {v: i for i, v in enumerate(sorted(range(n), key=f2.values.__getitem__))}
    # phase one: adjacent transpositions toward the target order
    while True:
        order = sorted(range(n), key=current.values.__getitem__)
        swap = None
        for a, b in zip(order, order[1:]):
            if target_rank[a] > target_rank[b]:
                swap = (a, b)
                break
        if swap is None:
            break
        a, b = swap
        pos = order.index(b)
        above = current.values[order[pos + 1]] if pos + 1 < n else None
        vb = current.values[b]
        push(a, (vb + above) / 2 if above is not None else vb + 1.0)
    # phase two: value adjustment, crossing-free
    order = sorted(range(n), key=current.values.__getitem__)
    for v in order:  # down-movers bottom-up
        if f2.values[v] < current.values[v]:
            push(v, f2.values[v])
    for v in reversed(order):  # up-movers top-down
        if f2.values[v] > current.values[v]:
            push(v, f2.values[v])
    if current.values != f2.values:
        raise NotMinimalError("decomposition failed to reach the target field")
    return PerturbationSequence(tuple(fields), tuple(steps))
