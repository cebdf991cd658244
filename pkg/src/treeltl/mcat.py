"""Ancestor trees of word tuples and their canonical order types.

The meet closure of a tuple of words (plus the constants) is a finite tree.
Its isomorphism type, respecting prefix order, lexicographic sibling order,
constants, and tuple-position markers, is the unit everything else computes
with.  Two encodings are used:

* `MarkedTree` - a concrete little tree with integer node ids, ordered
  sibling lists, an optional constant word per node, and position markers.
  Built either from concrete words or symbolically during enumeration.
* `OrderType` - the canonical value: a nested tuple per node
  ``(const_text, first_positions, second_positions, children)`` with children
  in sibling (lex) order.  Equality of types is plain equality of these
  tuples, so type sets are ordinary Python sets.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import TypeMismatch
from .words import (
    EPSILON,
    ConstantSet,
    Word,
    gcp,
    prefix_leq,
    strict_prefix,
    word_to_text,
)

# Marker tags are (group, index) with group in {"x", "y", "z"} and 1-based index.
Tag = tuple[str, int]


class MarkedTree:
    """Mutable rooted tree with ordered children, constant and position marks."""

    __slots__ = ("parent", "children", "const", "marks")

    def __init__(self):
        self.parent: list[int] = [-1]
        self.children: list[list[int]] = [[]]
        self.const: list[str | None] = [None]
        self.marks: list[set[Tag]] = [set()]

    def copy(self) -> "MarkedTree":
        t = MarkedTree.__new__(MarkedTree)
        t.parent = list(self.parent)
        t.children = [list(c) for c in self.children]
        t.const = list(self.const)
        t.marks = [set(m) for m in self.marks]
        return t

    def _new_node(self) -> int:
        self.parent.append(-1)
        self.children.append([])
        self.const.append(None)
        self.marks.append(set())
        return len(self.parent) - 1

    def add_child(self, parent: int, slot: int) -> int:
        """Insert a fresh child of `parent` at sibling position `slot`."""
        node = self._new_node()
        self.parent[node] = parent
        self.children[parent].insert(slot, node)
        return node

    def splice_edge(self, child: int) -> int:
        """Insert a fresh node on the edge above `child` and return it."""
        p = self.parent[child]
        node = self._new_node()
        self.parent[node] = p
        self.children[p][self.children[p].index(child)] = node
        self.children[node] = [child]
        self.parent[child] = node
        return node

    def size(self) -> int:
        return len(self.parent)

    def is_ancestor(self, a: int, b: int) -> bool:
        """True iff a is an ancestor of b or equal to it."""
        while b != -1:
            if b == a:
                return True
            b = self.parent[b]
        return False

    def depth(self, a: int) -> int:
        d = 0
        while self.parent[a] != -1:
            a = self.parent[a]
            d += 1
        return d

    def lca(self, a: int, b: int) -> int:
        da, db = self.depth(a), self.depth(b)
        while da > db:
            a = self.parent[a]
            da -= 1
        while db > da:
            b = self.parent[b]
            db -= 1
        while a != b:
            a = self.parent[a]
            b = self.parent[b]
        return a

    def lex_node_leq(self, a: int, b: int) -> bool:
        """Lexicographic order between nodes, from tree structure alone."""
        if self.is_ancestor(a, b):
            return True
        if self.is_ancestor(b, a):
            return False
        m = self.lca(a, b)
        ba = self._branch_at(m, a)
        bb = self._branch_at(m, b)
        kids = self.children[m]
        return kids.index(ba) <= kids.index(bb)

    def _branch_at(self, anc: int, node: int) -> int:
        while self.parent[node] != anc:
            node = self.parent[node]
        return node

    def nodes_of_group(self, group: str, arity: int) -> list[int]:
        out = [-1] * arity
        for i in range(self.size()):
            for (g, idx) in self.marks[i]:
                if g == group:
                    out[idx - 1] = i
        return out

    # -- canonical keys ---------------------------------------------------

    def key(self, groups: dict[str, str]) -> tuple:
        """Canonical nested-tuple form keeping all nodes.

        `groups` maps mark groups to output roles "x" (first) or "y" (second);
        unmapped groups are ignored.
        """

        def nk(i: int) -> tuple:
            xs, ys = self._mark_split(i, groups)
            return (
                self.const[i] or "",
                xs,
                ys,
                tuple(nk(c) for c in self.children[i]),
            )

        return nk(0)

    def restricted_key(self, groups: dict[str, str]) -> tuple:
        """Canonical form of the sub-ancestor-tree spanned by the selected
        groups and the constants (unary chains contracted, root kept)."""

        def rk(i: int) -> list[tuple]:
            kept: list[tuple] = []
            for c in self.children[i]:
                kept.extend(rk(c))
            xs, ys = self._mark_split(i, groups)
            relevant = self.const[i] is not None or xs or ys
            if i == 0 or relevant or len(kept) >= 2:
                return [(self.const[i] or "", xs, ys, tuple(kept))]
            return kept

        return rk(0)[0]

    def restricted_nodes(self, groups: dict[str, str]) -> tuple:
        """Like restricted_key but returns (node_id, const, xs, ys, children)
        so callers can line up two restrictions node by node."""

        def rk(i: int) -> list[tuple]:
            kept: list[tuple] = []
            for c in self.children[i]:
                kept.extend(rk(c))
            xs, ys = self._mark_split(i, groups)
            relevant = self.const[i] is not None or xs or ys
            if i == 0 or relevant or len(kept) >= 2:
                return [(i, self.const[i] or "", xs, ys, tuple(kept))]
            return kept

        return rk(0)[0]

    def _mark_split(self, i: int, groups: dict[str, str]):
        xs = []
        ys = []
        for (g, idx) in self.marks[i]:
            role = groups.get(g)
            if role == "x":
                xs.append(idx)
            elif role == "y":
                ys.append(idx)
        return tuple(sorted(xs)), tuple(sorted(ys))


@dataclass(frozen=True)
class OrderType:
    """Canonical isomorphism type of a marked ancestor tree.

    `first_arity` positions are the x marks, `second_arity` the y marks
    (0 for single-tuple types).  `root` is the canonical nested tuple.
    """

    first_arity: int
    second_arity: int
    root: tuple

    def to_text(self) -> str:
        return _render_node(self.root)

    def __repr__(self):
        return f"OrderType({self.first_arity},{self.second_arity},{self.to_text()})"


def _render_node(node: tuple) -> str:
    const, xs, ys, children = node
    marks = []
    if const:
        marks.append(f"c={const}")
    marks.extend(f"x{i}" for i in xs)
    marks.extend(f"y{i}" for i in ys)
    inner = ";".join(marks)
    if children:
        inner += "|" + ",".join(_render_node(c) for c in children)
    return "{" + inner + "}"


def tree_from_words(tagged: list[tuple[Tag, Word]], constants: ConstantSet):
    """Build the ancestor tree of the tagged words plus the constant closure.

    Returns (tree, node_of_word).
    """
    words = {EPSILON}
    for _, w in tagged:
        words.add(w)
    words.update(constants.closure)
    base = list(words)
    for i in range(len(base)):
        for j in range(i + 1, len(base)):
            words.add(gcp(base[i], base[j]))

    ordered = sorted(words, key=lambda w: (len(w), w))
    node_of: dict[Word, int] = {EPSILON: 0}
    word_at: list[Word] = [EPSILON]
    tree = MarkedTree()
    for w in ordered:
        if w == EPSILON:
            continue
        parent_word = EPSILON
        for v in ordered:
            if len(parent_word) <= len(v) < len(w) and prefix_leq(v, w):
                parent_word = v
        p = node_of[parent_word]
        # children stay sorted by the label right after the parent word
        label = w[len(parent_word)]
        slot = 0
        for c in tree.children[p]:
            if word_at[c][len(parent_word)] < label:
                slot += 1
        node = tree.add_child(p, slot)
        node_of[w] = node
        word_at.append(w)

    for c in constants.closure:
        tree.const[node_of[c]] = word_to_text(c)
    for tag, w in tagged:
        tree.marks[node_of[w]].add(tag)
    return tree, node_of


def pair_type(wt: tuple[Word, ...], vt: tuple[Word, ...], constants: ConstantSet) -> OrderType:
    """Canonical type of the joint ancestor tree of (wt, vt)."""
    if len(wt) != len(vt):
        raise TypeMismatch(f"arities differ: {len(wt)} vs {len(vt)}")
    tagged = [(("x", i + 1), w) for i, w in enumerate(wt)]
    tagged += [(("y", i + 1), v) for i, v in enumerate(vt)]
    tree, _ = tree_from_words(tagged, constants)
    return OrderType(len(wt), len(vt), tree.key({"x": "x", "y": "y"}))


def tuple_type(wt: tuple[Word, ...], constants: ConstantSet) -> OrderType:
    """Canonical type of a single tuple."""
    tagged = [(("x", i + 1), w) for i, w in enumerate(wt)]
    tree, _ = tree_from_words(tagged, constants)
    return OrderType(len(wt), 0, tree.key({"x": "x"}))


def first_restriction(t: OrderType) -> OrderType:
    tree = materialize(t)
    return OrderType(t.first_arity, 0, tree.restricted_key({"x": "x"}))


def second_restriction(t: OrderType) -> OrderType:
    tree = materialize(t)
    return OrderType(t.second_arity, 0, tree.restricted_key({"y": "x"}))


def materialize(t: OrderType) -> MarkedTree:
    """Rebuild a MarkedTree from a canonical type."""
    tree = MarkedTree()

    def build(node: tuple, into: int):
        const, xs, ys, children = node
        if const:
            tree.const[into] = const
        for i in xs:
            tree.marks[into].add(("x", i))
        for i in ys:
            tree.marks[into].add(("y", i))
        for child in children:
            c = tree.add_child(into, len(tree.children[into]))
            build(child, c)

    build(t.root, 0)
    return tree


@dataclass(frozen=True)
class McatStructure:
    """Concrete ancestor tree: node words with constant and position marks."""

    nodes: tuple[Word, ...]
    constant_marks: dict[Word, tuple[str, ...]]
    position_marks: dict[Word, tuple[int, ...]]


def mcat(values: tuple[Word, ...], constants: ConstantSet) -> McatStructure:
    """Meet closure of the tuple values and constants, with marks."""
    tagged = [(("x", i + 1), w) for i, w in enumerate(values)]
    tree, node_of = tree_from_words(tagged, constants)
    nodes = tuple(sorted(node_of, key=lambda w: (len(w), w)))
    cmarks: dict[Word, tuple[str, ...]] = {}
    declared = {v: n for n, v in constants.entries}
    for c in constants.closure:
        cmarks[c] = (declared.get(c, "_" + word_to_text(c)),)
    pmarks: dict[Word, list[int]] = {}
    for i, w in enumerate(values):
        pmarks.setdefault(w, []).append(i + 1)
    return McatStructure(nodes, cmarks, {w: tuple(v) for w, v in pmarks.items()})


def mcat_nodes(values: tuple[Word, ...], constants: ConstantSet) -> list[Word]:
    """Node words of the ancestor tree, sorted by (length, labels)."""
    words = {EPSILON}
    words.update(values)
    words.update(constants.closure)
    base = list(words)
    for i in range(len(base)):
        for j in range(i + 1, len(base)):
            words.add(gcp(base[i], base[j]))
    return sorted(words, key=lambda w: (len(w), w))


def induced_iso_pair(
    wt: tuple[Word, ...], vt: tuple[Word, ...], constants: ConstantSet
) -> dict[Word, Word] | None:
    """The node bijection between the two ancestor trees, or None if the
    tuple types differ.  Fixes every constant and the root; maps the meet
    of any position set on the w side to the meet of the same set on v."""
    if len(wt) != len(vt):
        return None
    if tuple_type(wt, constants) != tuple_type(vt, constants):
        return None
    h: dict[Word, Word] = {EPSILON: EPSILON}
    for u in mcat_nodes(wt, constants):
        if u == EPSILON:
            continue
        targets = [vt[i] for i in range(len(wt)) if prefix_leq(u, wt[i])]
        targets += [c for c in constants.closure if prefix_leq(u, c)]
        img = targets[0]
        for t in targets[1:]:
            img = gcp(img, t)
        h[u] = img
    return h


def induced_iso(t: OrderType) -> dict[tuple, tuple]:
    """Type-level induced isomorphism as a map between restricted node paths.

    Raises TypeMismatch when the first and second restrictions differ.  The
    returned map uses node addresses (child-index paths from the root) of the
    joint canonical tree.
    """
    tree = materialize(t)
    fwd, _ = _structural_iso(tree)
    addr = _addresses(tree)
    return {addr[a]: addr[b] for a, b in fwd.items()}


def _addresses(tree: MarkedTree) -> dict[int, tuple]:
    out = {0: ()}

    def rec(i: int, path: tuple):
        for k, c in enumerate(tree.children[i]):
            out[c] = path + (k,)
            rec(c, path + (k,))

    rec(0, ())
    return out


def _structural_iso(tree: MarkedTree):
    """Pair up the x-side and y-side restrictions of a joint tree.

    Returns (h, x_nodes) where h maps original node ids of the x-side
    restriction to node ids of the y-side restriction.
    """
    a = tree.restricted_nodes({"x": "x"})
    b = tree.restricted_nodes({"y": "x"})
    h: dict[int, int] = {}

    def zip_nodes(na: tuple, nb: tuple):
        ia, ca, xa, _, kids_a = na
        ib, cb, xb, _, kids_b = nb
        if ca != cb or xa != xb or len(kids_a) != len(kids_b):
            raise TypeMismatch("first and second restrictions differ")
        h[ia] = ib
        for qa, qb in zip(kids_a, kids_b):
            zip_nodes(qa, qb)

    zip_nodes(a, b)
    return h, a


def is_noncontracting(t: OrderType) -> bool:
    """Loop-type check: no node is mapped strictly above itself, and no node
    strictly below a fixed node is mapped strictly downward-away from it."""
    tree = materialize(t)
    h, _ = _structural_iso(tree)
    for d, hd in h.items():
        if hd != d and tree.is_ancestor(hd, d):
            return False
    for e, he in h.items():
        if he != e:
            continue
        for d, hd in h.items():
            if d != e and tree.is_ancestor(d, e) and d != hd and tree.is_ancestor(d, hd):
                return False
    return True


def is_noncontracting_pair(
    wt: tuple[Word, ...], vt: tuple[Word, ...], constants: ConstantSet
) -> bool:
    """Concrete-pair variant of is_noncontracting."""
    h = induced_iso_pair(wt, vt, constants)
    if h is None:
        raise TypeMismatch("tuple types differ")
    for d, hd in h.items():
        if hd != d and strict_prefix(hd, d):
            return False
    for e, he in h.items():
        if he != e:
            continue
        for d, hd in h.items():
            if strict_prefix(d, e) and d != hd and strict_prefix(d, hd):
                return False
    return True


def stretch_leq(a, b, constants: ConstantSet) -> bool:
    """Stretch quasi-order on configurations: same state, same tuple type,
    and no interval of the ancestor tree shrinks under the induced map."""
    if a.state != b.state:
        return False
    h = induced_iso_pair(a.values, b.values, constants)
    if h is None:
        return False
    nodes = mcat_nodes(a.values, constants)
    for e in nodes:
        if e == EPSILON:
            continue
        # parent within the tree: longest proper prefix present
        p = EPSILON
        for v in nodes:
            if len(v) > len(p) and len(v) < len(e) and prefix_leq(v, e):
                p = v
        if len(h[e]) - len(h[p]) < len(e) - len(p):
            return False
    return True
