"""Merge (split) trees, branch decompositions, BDTs and label schemes.

Trees are stored as parent maps over hashable node ids (field vertices are
ints; hand-built counterexample trees use letters). Parents always have
strictly smaller scalar value than their children, so the root is the global
minimum and leaves are maxima.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .errors import AbstractInvariantError, SchemeMismatchError, SizeGuardError, ValidationError
from .field import TOLERANCE, ScalarField


class _RootedTree:
    """Shared parent-map tree machinery; immutable by convention."""

    def __init__(self, parent: dict, value: dict, root):
        if root not in value or parent.get(root) is not None:
            raise ValidationError("root must be a node without parent")
        if set(parent) != set(value):
            raise ValidationError("parent and value maps disagree on node set")
        self.parent = dict(parent)
        self.value = {v: float(x) for v, x in value.items()}
        self.root = root
        ch = {v: [] for v in value}
        for v, p in parent.items():
            if p is None:
                continue
            if p not in value:
                raise ValidationError(f"unknown parent {p!r} of node {v!r}")
            if not self.value[p] < self.value[v]:
                raise ValidationError(
                    f"parent {p!r} ({self.value[p]}) not below child {v!r} ({self.value[v]})"
                )
            ch[p].append(v)
        self._children = {
            v: tuple(sorted(c, key=lambda u: (self.value[u], str(u)))) for v, c in ch.items()
        }
        # reachability doubles as acyclicity check
        seen = set()
        stack = [root]
        while stack:
            v = stack.pop()
            seen.add(v)
            stack.extend(self._children[v])
        if len(seen) != len(value):
            raise ValidationError("tree is not connected to the root")

    def nodes(self):
        return self.value.keys()

    def children(self, v):
        return self._children[v]

    def child_count(self, v) -> int:
        return len(self._children[v])

    def leaves(self):
        return [v for v in self.sorted_nodes() if not self._children[v]]

    def sorted_nodes(self):
        return sorted(self.value, key=lambda v: (self.value[v], str(v)))

    def subtree_nodes(self, v):
        out = []
        stack = [v]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self._children[u])
        return out

    def node_count(self) -> int:
        return len(self.value)

    def edge_count(self) -> int:
        return len(self.value) - 1

    def max_child_count(self) -> int:
        return max(len(c) for c in self._children.values())

    def max_undirected_degree(self) -> int:
        """Maximum number of incident tree edges over all nodes."""
        return max(
            len(self._children[v]) + (0 if self.parent[v] is None else 1)
            for v in self.value
        )

    def path_to_root(self, v):
        out = [v]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])
        return out

    def is_ancestor(self, a, b) -> bool:
        """True iff a is a proper ancestor of b."""
        cur = self.parent[b]
        while cur is not None:
            if cur == a:
                return True
            cur = self.parent[cur]
        return False

    def structure_equal(self, other) -> bool:
        return (
            self.root == other.root
            and self.parent == other.parent
        )


class AugmentedMergeTree(_RootedTree):
    """Split tree over all field vertices."""


class AbstractMergeTree(_RootedTree):
    """Merge tree with regular vertices pruned: root (degree 1), saddles, maxima."""


def build_augmented(field: ScalarField) -> AugmentedMergeTree:
    """Descending sweep with union-find over superlevel components.

    Processing vertices by decreasing value, each vertex becomes the lowest
    vertex of the union of adjacent components above it; their previous
    lowest vertices get it as parent.
    """
    values = field.values
    order = sorted(range(field.vertex_count), key=lambda v: -values[v])
    uf_parent = {}
    lowest = {}

    def find(v):
        r = v
        while uf_parent[r] != r:
            r = uf_parent[r]
        while uf_parent[v] != r:
            uf_parent[v], v = r, uf_parent[v]
        return r

    parent = {}
    for v in order:
        uf_parent[v] = v
        lowest[v] = v
        parent[v] = None
        for u in field.domain.adjacency[v]:
            if values[u] > values[v]:
                r = find(u)
                if lowest[r] != v:
                    parent[lowest[r]] = v
                    uf_parent[r] = find(v)
                    lowest[find(v)] = v
    root = order[-1]
    return AugmentedMergeTree(parent, {v: values[v] for v in range(field.vertex_count)}, root)


def prune_to_abstract(aug: AugmentedMergeTree) -> AbstractMergeTree:
    """Contract away regular vertices (exactly one child, not the root)."""
    keep = {
        v
        for v in aug.nodes()
        if v == aug.root or aug.child_count(v) != 1
    }
    parent = {}
    for v in keep:
        if v == aug.root:
            parent[v] = None
            continue
        p = aug.parent[v]
        while p not in keep:
            p = aug.parent[p]
        parent[v] = p
    tree = AbstractMergeTree(parent, {v: aug.value[v] for v in keep}, aug.root)
    _check_abstract_invariants(tree)
    return tree


def _check_abstract_invariants(tree: AbstractMergeTree) -> None:
    if tree.child_count(tree.root) != 1:
        raise AbstractInvariantError(
            f"root has {tree.child_count(tree.root)} children, expected 1 "
            "(domain superlevel sets disconnect at the global minimum)"
        )
    for v in tree.nodes():
        if v != tree.root and tree.child_count(v) == 1:
            raise AbstractInvariantError(f"regular node {v!r} left in abstract tree")


def abstract_merge_tree(parent: dict, value: dict, root=None) -> AbstractMergeTree:
    """Build an abstract merge tree directly (used for figure counterexamples)."""
    if root is None:
        roots = [v for v, p in parent.items() if p is None]
        if len(roots) != 1:
            raise ValidationError(f"expected exactly one root, got {roots}")
        root = roots[0]
    tree = AbstractMergeTree(parent, value, root)
    _check_abstract_invariants(tree)
    return tree


def merge_tree_of(field: ScalarField) -> AbstractMergeTree:
    return prune_to_abstract(build_augmented(field))


# ---------------------------------------------------------------------------
# Branch decompositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """Monotone path from its lowest node (start) to a leaf maximum."""

    nodes: tuple
    birth: float  # value at the leaf
    death: float  # value at the start

    @property
    def start(self):
        return self.nodes[0]

    @property
    def leaf(self):
        return self.nodes[-1]

    @property
    def name(self) -> str:
        return f"{self.leaf}-{self.start}"

    @property
    def persistence(self) -> float:
        return self.birth - self.death


@dataclass(frozen=True)
class BranchDecomposition:
    tree: AbstractMergeTree
    branches: tuple[Branch, ...]
    main: Branch
    containing: dict  # node -> Branch with node = b_i, i > 1 (root -> main)


def decomposition_from_choice(tree: AbstractMergeTree, choice: dict) -> BranchDecomposition:
    """Branch decomposition induced by one continuation child per internal node."""
    branches = []
    containing = {}
    main = None
    for leaf in tree.leaves():
        path = [leaf]
        cur = leaf
        while tree.parent[cur] is not None and choice[tree.parent[cur]] == cur:
            cur = tree.parent[cur]
            path.append(cur)
        if tree.parent[cur] is not None:
            path.append(tree.parent[cur])
        nodes = tuple(reversed(path))
        b = Branch(nodes, birth=tree.value[leaf], death=tree.value[nodes[0]])
        branches.append(b)
        for v in nodes[1:]:
            containing[v] = b
        if nodes[0] == tree.root:
            main = b
    if main is None:
        raise ValidationError("decomposition has no branch containing the root")
    containing[tree.root] = main
    branches.sort(key=lambda b: (b.death, b.birth, str(b.leaf)))
    return BranchDecomposition(tree, tuple(branches), main, containing)


def persistence_choice(tree: AbstractMergeTree) -> dict:
    """Elder rule: at every inner node continue toward the highest maximum.

    Exact ties cannot occur for injective fields; the tie-break (leaf with
    the smaller id) keeps hand-built trees with repeated values reproducible.
    """
    best_leaf = {}
    choice = {}
    for v in sorted(tree.nodes(), key=lambda u: (-tree.value[u], str(u))):
        kids = tree.children(v)
        if not kids:
            best_leaf[v] = v
            continue
        best = min(kids, key=lambda c: (-tree.value[best_leaf[c]], _id_key(best_leaf[c])))
        choice[v] = best
        best_leaf[v] = best_leaf[best]
    return choice


def _id_key(node):
    # "lower id wins" tie-break, safe for mixed int/str ids
    return (0, node, "") if isinstance(node, int) else (1, 0, str(node))


def persistence_branch_decomposition(tree: AbstractMergeTree) -> BranchDecomposition:
    return decomposition_from_choice(tree, persistence_choice(tree))


@dataclass(frozen=True)
class Bdt:
    """Branch decomposition tree: nodes are branches, parenthood is nesting."""

    decomposition: BranchDecomposition
    root_branch: Branch
    parent: dict  # Branch -> Branch | None
    children: dict  # Branch -> tuple[Branch, ...]

    def nodes(self):
        return self.decomposition.branches

    def node_count(self):
        return len(self.decomposition.branches)


@dataclass(frozen=True)
class OrderedBdt(Bdt):
    """Bdt plus, per node, child groups ordered by attachment along the parent path.

    Children attached at the same saddle share a group and stay incomparable.
    """

    groups: dict = dc_field(default_factory=dict)  # Branch -> tuple[tuple[Branch, ...], ...]


def build_bdt(bd: BranchDecomposition) -> Bdt:
    parent = {}
    children = {b: [] for b in bd.branches}
    for b in bd.branches:
        if b is bd.main:
            parent[b] = None
            continue
        p = bd.containing[b.start]
        parent[b] = p
        children[p].append(b)
    ordered = {
        b: tuple(sorted(c, key=lambda a: (a.death, a.birth, str(a.leaf))))
        for b, c in children.items()
    }
    return Bdt(bd, bd.main, parent, ordered)


def build_obdt(bd: BranchDecomposition) -> OrderedBdt:
    base = build_bdt(bd)
    groups = {}
    for b in bd.branches:
        pos = {v: i for i, v in enumerate(b.nodes)}
        by_attach = {}
        for c in base.children[b]:
            by_attach.setdefault(pos[c.start], []).append(c)
        groups[b] = tuple(
            tuple(sorted(by_attach[i], key=lambda a: (a.birth, str(a.leaf))))
            for i in sorted(by_attach)
        )
    return OrderedBdt(bd, bd.main, base.parent, base.children, groups)


# ---------------------------------------------------------------------------
# Label schemes (one per distance family)
# ---------------------------------------------------------------------------

class _Blank:
    """Label of a merge tree root: forces the two roots onto each other."""

    def __repr__(self):
        return "BLANK"


BLANK = _Blank()

EDGE_LENGTH = "edge_length"
NODE_DIST_TO_PARENT = "node_dist_to_parent"
BDT_BIRTH_DEATH = "bdt_birth_death"
OBDT_BIRTH_DEATH = "obdt_birth_death"
BRANCH_LABEL_ON_NODES = "branch_label_on_nodes"

SCHEMES = (
    EDGE_LENGTH,
    NODE_DIST_TO_PARENT,
    BDT_BIRTH_DEATH,
    OBDT_BIRTH_DEATH,
    BRANCH_LABEL_ON_NODES,
)


@dataclass(frozen=True)
class LabeledTree:
    scheme: str
    root: object
    parent: dict
    labels: dict
    children: dict
    groups: dict | None = None  # ordered child groups; None = unordered

    def nodes(self):
        return self.parent.keys()

    def node_count(self):
        return len(self.parent)

    def subtree_nodes(self, v):
        out = []
        stack = [v]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self.children[u])
        return out


def _children_map(parent, sort_key):
    ch = {v: [] for v in parent}
    for v, p in parent.items():
        if p is not None:
            ch[p].append(v)
    return {v: tuple(sorted(c, key=sort_key)) for v, c in ch.items()}


def label_for_scheme(obj, scheme: str) -> LabeledTree:
    """Labeled tree for one of the per-distance schemes of the label-function
    catalogue; see the distances module for which distance uses which."""
    if scheme in (EDGE_LENGTH, NODE_DIST_TO_PARENT):
        if not isinstance(obj, _RootedTree):
            raise SchemeMismatchError(f"{scheme} needs a merge tree")
        labels = {
            v: (BLANK if obj.parent[v] is None else obj.value[v] - obj.value[obj.parent[v]])
            for v in obj.nodes()
        }
        ch = {v: obj.children(v) for v in obj.nodes()}
        return LabeledTree(scheme, obj.root, dict(obj.parent), labels, ch)
    if scheme == BDT_BIRTH_DEATH or scheme == OBDT_BIRTH_DEATH:
        if not isinstance(obj, Bdt):
            raise SchemeMismatchError(f"{scheme} needs a branch decomposition tree")
        if scheme == OBDT_BIRTH_DEATH and not isinstance(obj, OrderedBdt):
            raise SchemeMismatchError("ordered scheme needs an ordered BDT")
        key = {b: b.name for b in obj.nodes()}
        parent = {key[b]: (None if obj.parent[b] is None else key[obj.parent[b]]) for b in obj.nodes()}
        labels = {key[b]: (b.birth, b.death) for b in obj.nodes()}
        ch = {key[b]: tuple(key[c] for c in obj.children[b]) for b in obj.nodes()}
        groups = None
        if scheme == OBDT_BIRTH_DEATH:
            groups = {
                key[b]: tuple(tuple(key[c] for c in grp) for grp in obj.groups[b])
                for b in obj.nodes()
            }
        return LabeledTree(scheme, key[obj.root_branch], parent, labels, ch, groups)
    if scheme == BRANCH_LABEL_ON_NODES:
        if not isinstance(obj, AbstractMergeTree):
            raise SchemeMismatchError(f"{scheme} needs an abstract merge tree")
        bd = persistence_branch_decomposition(obj)
        starting = {}
        for b in bd.branches:
            starting.setdefault(b.start, []).append(b)
        labels = {}
        for v in obj.nodes():
            if not obj.children(v):
                b = next(b for b in bd.branches if b.leaf == v)
            else:
                # saddle or root: longest branch starting here
                cands = starting.get(v, [])
                if not cands:
                    raise SchemeMismatchError(f"no branch starts at inner node {v!r}")
                b = min(cands, key=lambda a: (-a.persistence, -a.birth, _id_key(a.leaf)))
            labels[v] = (b.birth, b.death)
        ch = {v: obj.children(v) for v in obj.nodes()}
        return LabeledTree(scheme, obj.root, dict(obj.parent), labels, ch)
    raise SchemeMismatchError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Subtree inclusion up to isomorphism
# ---------------------------------------------------------------------------

INCLUSION_NODE_LIMIT = 64


def tree_included_up_to_iso(
    t1,
    t2,
    ordered: bool = False,
    *,
    exempt1=frozenset(),
    exempt2=frozenset(),
    max_nodes: int = INCLUSION_NODE_LIMIT,
) -> bool:
    """Injective root- and parent-preserving embedding of t1 into t2.

    Merge tree nodes must agree in scalar value up to the global tolerance.
    Exempt nodes (renamed by a perturbation) match only exempt nodes, with no
    value constraint. For BDTs the check compares branch endpoints under the
    same renaming; `ordered` additionally requires the attachment orders of
    mapped siblings to agree exactly (same group iff same group).
    """
    if isinstance(t1, _RootedTree) and isinstance(t2, _RootedTree):
        n = t1.node_count() + t2.node_count()
        if n > max_nodes:
            raise SizeGuardError("tree inclusion", n, max_nodes)
        ex1, ex2 = frozenset(exempt1), frozenset(exempt2)

        def compatible(u, w):
            e1, e2 = u in ex1, w in ex2
            if e1 or e2:
                return e1 and e2
            return abs(t1.value[u] - t2.value[w]) <= TOLERANCE

        return _embed(
            t1.root, t2.root, t1.children, t2.children, compatible, None, None
        )
    if isinstance(t1, Bdt) and isinstance(t2, Bdt):
        return bdt_included_up_to_iso(
            t1, t2, ordered, exempt1=exempt1, exempt2=exempt2, max_nodes=max_nodes
        )
    raise ValidationError("inclusion needs two merge trees or two BDTs")


def bdt_included_up_to_iso(
    b1: Bdt,
    b2: Bdt,
    ordered: bool = False,
    *,
    exempt1=frozenset(),
    exempt2=frozenset(),
    max_nodes: int = INCLUSION_NODE_LIMIT,
) -> bool:
    n = b1.node_count() + b2.node_count()
    if n > max_nodes:
        raise SizeGuardError("bdt inclusion", n, max_nodes)
    ex1, ex2 = frozenset(exempt1), frozenset(exempt2)

    def vmatch(a, b):
        if a == b:
            return True
        return a in ex1 and b in ex2

    def compatible(x: Branch, y: Branch):
        return vmatch(x.leaf, y.leaf) and vmatch(x.start, y.start)

    g1 = b1.groups if (ordered and isinstance(b1, OrderedBdt)) else None
    g2 = b2.groups if (ordered and isinstance(b2, OrderedBdt)) else None
    if ordered and (g1 is None or g2 is None):
        raise ValidationError("ordered inclusion needs ordered BDTs")
    return _embed(
        b1.root_branch,
        b2.root_branch,
        lambda v: b1.children[v],
        lambda v: b2.children[v],
        compatible,
        g1,
        g2,
    )


def _group_index(groups, node, child):
    for i, grp in enumerate(groups[node]):
        if child in grp:
            return i
    raise KeyError(child)


def _embed(root1, root2, children1, children2, compatible, groups1, groups2) -> bool:
    sizes1 = {}
    sizes2 = {}

    def size(v, children, sizes):
        if v not in sizes:
            sizes[v] = 1 + sum(size(c, children, sizes) for c in children(v))
        return sizes[v]

    def rec(u, w):
        if not compatible(u, w):
            return False
        if size(u, children1, sizes1) > size(w, children2, sizes2):
            return False
        cs1 = list(children1(u))
        cs2 = list(children2(w))
        if len(cs1) > len(cs2):
            return False
        if groups1 is not None:
            gi1 = {c: _group_index(groups1, u, c) for c in cs1}
            gi2 = {c: _group_index(groups2, w, c) for c in cs2}

        def assign(i, used, pairs):
            if i == len(cs1):
                return True
            a = cs1[i]
            for b in cs2:
                if b in used:
                    continue
                if groups1 is not None:
                    ok = True
                    for a2, b2 in pairs:
                        same1 = gi1[a] == gi1[a2]
                        same2 = gi2[b] == gi2[b2]
                        if same1 != same2:
                            ok = False
                            break
                        if not same1 and ((gi1[a] < gi1[a2]) != (gi2[b] < gi2[b2])):
                            ok = False
                            break
                    if not ok:
                        continue
                if rec(a, b):
                    used.add(b)
                    pairs.append((a, b))
                    if assign(i + 1, used, pairs):
                        return True
                    pairs.pop()
                    used.discard(b)
            return False

        return assign(0, set(), [])

    return rec(root1, root2)


# ---------------------------------------------------------------------------
# JSON dumps
# ---------------------------------------------------------------------------

def tree_to_dict(tree: _RootedTree) -> dict:
    return {
        "root": tree.root,
        "nodes": [
            {"id": v, "value": tree.value[v], "parent": tree.parent[v]}
            for v in tree.sorted_nodes()
        ],
    }


def tree_from_dict(data: dict) -> AbstractMergeTree:
    parent = {}
    value = {}
    for entry in data["nodes"]:
        key = entry["id"]
        parent[key] = entry["parent"]
        value[key] = float(entry["value"])
    return abstract_merge_tree(parent, value, data.get("root"))


def bdt_to_dict(bdt: Bdt) -> dict:
    out = []
    groups = bdt.groups if isinstance(bdt, OrderedBdt) else None
    for b in sorted(bdt.nodes(), key=lambda x: (x.death, x.birth, str(x.leaf))):
        entry = {
            "branch": b.name,
            "birth": b.birth,
            "death": b.death,
            "parent": bdt.parent[b].name if bdt.parent[b] is not None else None,
        }
        if groups is not None:
            entry["child_order"] = [[c.name for c in grp] for grp in groups[b]]
        out.append(entry)
    return {"root": bdt.root_branch.name, "branches": out}

