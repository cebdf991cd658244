"""Type universes, guard filtering, and the composition product.

A `TypeContext` is keyed by the prefix-closed constant set.  It interns
canonical order types as small integers, enumerates the finite universe of
pair/tuple types per arity, and memoizes the composition table.  All of this
is shared process-wide across automata over the same constants, which is what
makes saturation cheap on large batches.

Enumeration works by inserting one marked value at a time into the growing
ancestor tree.  Relative to a meet-closed tree, a fresh value can only

* coincide with an existing node,
* sit strictly inside an edge (impossible above a constant node, since the
  closure makes consecutive constant prefixes adjacent),
* hang off an existing node in a fresh direction, at any lex slot, or
* split an edge and hang off the split point to either side.

Every placement is realizable with concrete rationals once the tree is
realized with wide enough gaps, so the symbolic enumeration is exact.
"""

from __future__ import annotations

import os

from .errors import ResourceCeiling
from .guards import Guard, eval_guard_on_tree
from .mcat import MarkedTree, OrderType, is_noncontracting, materialize, tree_from_words
from .words import EMPTY_CONSTANTS, ConstantSet, word_to_text

DEFAULT_TYPE_CEILING = 500_000
DEFAULT_COMPOSE_CEILING = 1_000_000


def _type_ceiling() -> int:
    raw = os.environ.get("TREELTL_TYPE_CEILING")
    if raw:
        return int(raw)
    return DEFAULT_TYPE_CEILING


def _full_key(tree: MarkedTree) -> tuple:
    """Dedup key over all mark groups, keeping sibling order."""

    def nk(i: int) -> tuple:
        return (
            tree.const[i] or "",
            tuple(sorted(tree.marks[i])),
            tuple(nk(c) for c in tree.children[i]),
        )

    return nk(0)


def insertion_candidates(tree: MarkedTree, tag) -> list[MarkedTree]:
    """All placements of one fresh tagged value relative to the tree."""
    out = []
    n_nodes = tree.size()
    for node in range(n_nodes):
        t2 = tree.copy()
        t2.marks[node].add(tag)
        out.append(t2)
    for child in range(1, n_nodes):
        if tree.const[child] is not None:
            continue
        t2 = tree.copy()
        mid = t2.splice_edge(child)
        t2.marks[mid].add(tag)
        out.append(t2)
    for node in range(n_nodes):
        for slot in range(len(tree.children[node]) + 1):
            t2 = tree.copy()
            c = t2.add_child(node, slot)
            t2.marks[c].add(tag)
            out.append(t2)
    for child in range(1, n_nodes):
        if tree.const[child] is not None:
            continue
        for side in (0, 1):
            t2 = tree.copy()
            mid = t2.splice_edge(child)
            c = t2.add_child(mid, side)
            t2.marks[c].add(tag)
            out.append(t2)
    return out


class TypeContext:
    """Interned type universe and composition table over one constant set."""

    _registry: dict[tuple, "TypeContext"] = {}

    def __init__(self, constants: ConstantSet):
        self.constants = constants
        self._ids: dict[OrderType, int] = {}
        self._types: list[OrderType] = []
        self._pair_universe: dict[int, tuple[int, ...]] = {}
        self._tuple_universe: dict[int, tuple[int, ...]] = {}
        self._guard_types: dict[tuple, tuple[int, ...]] = {}
        self._compose: dict[tuple[int, int], tuple[int, ...]] = {}
        self._first_restr: dict[int, int] = {}
        self._second_restr: dict[int, int] = {}
        self._noncontracting: dict[int, bool] = {}
        self._identity_pair: dict[int, int] = {}
        self._tree_cache: dict[int, MarkedTree] = {}

    @staticmethod
    def get(constants: ConstantSet | None) -> "TypeContext":
        constants = constants or EMPTY_CONSTANTS
        key = constants.closure
        ctx = TypeContext._registry.get(key)
        if ctx is None:
            ctx = TypeContext(constants)
            TypeContext._registry[key] = ctx
        return ctx

    # -- interning ---------------------------------------------------------

    def intern(self, t: OrderType) -> int:
        tid = self._ids.get(t)
        if tid is None:
            tid = len(self._types)
            self._ids[t] = tid
            self._types.append(t)
        return tid

    def type_of(self, tid: int) -> OrderType:
        return self._types[tid]

    def tree_of(self, tid: int) -> MarkedTree:
        tree = self._tree_cache.get(tid)
        if tree is None:
            tree = materialize(self._types[tid])
            self._tree_cache[tid] = tree
        return tree

    # -- universes ---------------------------------------------------------

    def _skeleton(self) -> MarkedTree:
        tree, _ = tree_from_words([], self.constants)
        return tree

    def _enumerate(self, tags) -> list[MarkedTree]:
        ceiling = _type_ceiling()
        states: dict[tuple, MarkedTree] = {}
        skel = self._skeleton()
        states[_full_key(skel)] = skel
        for tag in tags:
            nxt: dict[tuple, MarkedTree] = {}
            for tree in states.values():
                for t2 in insertion_candidates(tree, tag):
                    key = _full_key(t2)
                    if key not in nxt:
                        nxt[key] = t2
                if len(nxt) > ceiling:
                    raise ResourceCeiling(
                        f"type enumeration exceeded ceiling {ceiling}"
                    )
            states = nxt
        return list(states.values())

    def pair_universe(self, n: int) -> tuple[int, ...]:
        cached = self._pair_universe.get(n)
        if cached is not None:
            return cached
        tags = [("x", i) for i in range(1, n + 1)] + [("y", i) for i in range(1, n + 1)]
        found = set()
        for tree in self._enumerate(tags):
            t = OrderType(n, n, tree.key({"x": "x", "y": "y"}))
            found.add(t)
        ids = tuple(self.intern(t) for t in sorted(found, key=lambda t: t.root))
        self._pair_universe[n] = ids
        return ids

    def tuple_universe(self, n: int) -> tuple[int, ...]:
        cached = self._tuple_universe.get(n)
        if cached is not None:
            return cached
        tags = [("x", i) for i in range(1, n + 1)]
        found = set()
        for tree in self._enumerate(tags):
            found.add(OrderType(n, 0, tree.key({"x": "x"})))
        ids = tuple(self.intern(t) for t in sorted(found, key=lambda t: t.root))
        self._tuple_universe[n] = ids
        return ids

    def types_for_guard(self, guard: Guard, n: int) -> tuple[int, ...]:
        key = (guard, n)
        cached = self._guard_types.get(key)
        if cached is not None:
            return cached
        const_index = {name: value for name, value in self.constants.entries}
        hits = []
        for tid in self.pair_universe(n):
            tree = self.tree_of(tid)
            xnodes = tree.nodes_of_group("x", n)
            ynodes = tree.nodes_of_group("y", n)
            const_nodes = self._const_nodes(tree, const_index)
            if eval_guard_on_tree(guard, tree, xnodes, ynodes, const_nodes):
                hits.append(tid)
        result = tuple(hits)
        self._guard_types[key] = result
        return result

    def _const_nodes(self, tree: MarkedTree, const_index) -> dict[str, int]:
        by_text = {}
        for i in range(tree.size()):
            if tree.const[i] is not None:
                by_text[tree.const[i]] = i
        return {name: by_text[word_to_text(value)] for name, value in const_index.items()}

    # -- restrictions, identities, loop checks ------------------------------

    def first_restriction_id(self, tid: int) -> int:
        cached = self._first_restr.get(tid)
        if cached is None:
            t = self._types[tid]
            tree = self.tree_of(tid)
            cached = self.intern(
                OrderType(t.first_arity, 0, tree.restricted_key({"x": "x"}))
            )
            self._first_restr[tid] = cached
        return cached

    def second_restriction_id(self, tid: int) -> int:
        cached = self._second_restr.get(tid)
        if cached is None:
            t = self._types[tid]
            tree = self.tree_of(tid)
            cached = self.intern(
                OrderType(t.second_arity, 0, tree.restricted_key({"y": "x"}))
            )
            self._second_restr[tid] = cached
        return cached

    def noncontracting_id(self, tid: int) -> bool:
        cached = self._noncontracting.get(tid)
        if cached is None:
            cached = is_noncontracting(self._types[tid])
            self._noncontracting[tid] = cached
        return cached

    def identity_pair_id(self, rho_id: int) -> int:
        """Pair type of (w, w) for any tuple w of the given single type."""
        cached = self._identity_pair.get(rho_id)
        if cached is None:
            rho = self._types[rho_id]
            tree = materialize(rho)
            for i in range(tree.size()):
                for (g, idx) in list(tree.marks[i]):
                    if g == "x":
                        tree.marks[i].add(("y", idx))
            cached = self.intern(
                OrderType(rho.first_arity, rho.first_arity, tree.key({"x": "x", "y": "y"}))
            )
            self._identity_pair[rho_id] = cached
        return cached

    # -- composition ---------------------------------------------------------

    def compose_ids(self, a: int, b: int) -> tuple[int, ...]:
        key = (a, b)
        cached = self._compose.get(key)
        if cached is not None:
            return cached
        ta = self._types[a]
        tb = self._types[b]
        n = ta.first_arity
        if (
            ta.second_arity != tb.first_arity
            or self.second_restriction_id(a) != self.first_restriction_id(b)
        ):
            result: tuple[int, ...] = ()
        else:
            result = self._compose_compute(a, b, n)
        self._compose[key] = result
        return result

    def _compose_compute(self, a: int, b: int, n: int) -> tuple[int, ...]:
        base = materialize(self._types[a])
        states: dict[tuple, MarkedTree] = {_full_key(base): base}
        candidates = 0
        for i in range(1, n + 1):
            nxt: dict[tuple, MarkedTree] = {}
            for tree in states.values():
                placements = insertion_candidates(tree, ("z", i))
                candidates += len(placements)
                if candidates > DEFAULT_COMPOSE_CEILING:
                    raise ResourceCeiling(
                        f"composition exceeded {DEFAULT_COMPOSE_CEILING} placements"
                    )
                for t2 in placements:
                    nxt.setdefault(_full_key(t2), t2)
            states = nxt
        step = self._types[b]
        out = set()
        for tree in states.values():
            yz = OrderType(n, n, tree.restricted_key({"y": "x", "z": "y"}))
            if yz != step:
                continue
            xz = OrderType(n, n, tree.restricted_key({"x": "x", "z": "y"}))
            out.add(self.intern(xz))
        return tuple(sorted(out))


def enumerate_pair_types(
    n: int, constants: ConstantSet | None, guard: Guard | None = None
) -> set[OrderType]:
    """All pair types over the constants, optionally filtered by a guard."""
    ctx = TypeContext.get(constants)
    if guard is None:
        ids = ctx.pair_universe(n)
    else:
        ids = ctx.types_for_guard(guard, n)
    return {ctx.type_of(t) for t in ids}


def enumerate_tuple_types(n: int, constants: ConstantSet | None) -> set[OrderType]:
    ctx = TypeContext.get(constants)
    return {ctx.type_of(t) for t in ctx.tuple_universe(n)}


def compose_pair_types(t1: OrderType, t2: OrderType, constants: ConstantSet | None) -> set[OrderType]:
    """Exact composition: all pair types of (first of t1, second of t2)
    realizable jointly with t1 and t2 sharing the middle tuple."""
    ctx = TypeContext.get(constants)
    ids = ctx.compose_ids(ctx.intern(t1), ctx.intern(t2))
    return {ctx.type_of(t) for t in ids}
