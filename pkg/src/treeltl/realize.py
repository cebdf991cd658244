"""Concrete realizations of order types and order-preserving run surgery.

Everything here manufactures actual rational words: realizing a type with
wide gaps, extending a concrete tuple by one composition step, inserting
gaps across whole runs, building common stretch upper bounds, and lifting
runs along the injection induced by a stretch pair.  Constructions are
deterministic; fresh sibling labels are midpoints of their neighbours (or
one past the extremes), fresh depth comes from runs of zero labels.
"""

from __future__ import annotations

from fractions import Fraction

from .automata import Config, ConstraintAutomaton, Run, check_run
from .errors import InternalCheckFailed, PreconditionViolated, TypeMismatch
from .mcat import (
    MarkedTree,
    OrderType,
    induced_iso_pair,
    materialize,
    mcat_nodes,
    pair_type,
    stretch_leq,
    tuple_type,
)
from .words import (
    EPSILON,
    ZERO,
    ConstantSet,
    Word,
    gcp,
    insert_gap,
    is_constant_prefix,
    prefix_leq,
    strict_prefix,
    word_from_text,
)

ONE = Fraction(1)


def _fill_labels(labels: list) -> list[Fraction]:
    """Complete a sibling label list: None entries get fresh rationals that
    respect the (ascending) pinned neighbours."""
    n = len(labels)
    out = list(labels)
    i = 0
    while i < n:
        if out[i] is not None:
            i += 1
            continue
        j = i
        while j < n and out[j] is None:
            j += 1
        left = out[i - 1] if i > 0 else None
        right = out[j] if j < n else None
        count = j - i
        for k in range(count):
            if left is None and right is None:
                out[i + k] = Fraction(k + 1)
            elif left is None:
                out[i + k] = right - (count - k)
            elif right is None:
                out[i + k] = left + (k + 1)
            else:
                out[i + k] = left + (right - left) * (k + 1) / (count + 1)
        i = j
    return out


def assign_words(tree: MarkedTree, gap: int) -> list[Word]:
    """Concrete words per node: constants stay literal, every other edge gets
    one fresh label followed by `gap` zero labels."""
    words: list[Word] = [EPSILON] * tree.size()
    if tree.const[0] is not None and word_from_text(tree.const[0]) != EPSILON:
        raise InternalCheckFailed("root constant must be the empty word")

    def rec(node: int):
        u = words[node]
        kids = tree.children[node]
        labels: list = [None] * len(kids)
        for idx, c in enumerate(kids):
            if tree.const[c] is not None:
                cw = word_from_text(tree.const[c])
                if len(cw) != len(u) + 1 or not prefix_leq(u, cw):
                    raise InternalCheckFailed("constant node not adjacent to its prefix")
                labels[idx] = cw[len(u)]
        labels = _fill_labels(labels)
        for idx, c in enumerate(kids):
            if tree.const[c] is not None:
                words[c] = word_from_text(tree.const[c])
            else:
                words[c] = u + (labels[idx],) + (ZERO,) * gap
            rec(c)

    rec(0)
    return words


def realize_tuple(rho: OrderType, constants: ConstantSet, gap: int = 2) -> tuple[Word, ...]:
    """A concrete tuple of the given single-tuple type, with wide gaps."""
    tree = materialize(rho)
    words = assign_words(tree, gap)
    nodes = tree.nodes_of_group("x", rho.first_arity)
    out = tuple(words[i] for i in nodes)
    if tuple_type(out, constants) != rho:
        raise InternalCheckFailed("tuple realization does not reproduce its type")
    return out


def realize_with_gaps(t: OrderType, constants: ConstantSet, gap: int = 2):
    """Concrete (first, second) tuples of the given pair type whose joint
    ancestor tree has all non-constant intervals longer than `gap`."""
    tree = materialize(t)
    words = assign_words(tree, gap)
    wt = tuple(words[i] for i in tree.nodes_of_group("x", t.first_arity))
    vt = tuple(words[i] for i in tree.nodes_of_group("y", t.second_arity))
    if pair_type(wt, vt, constants) != t:
        raise InternalCheckFailed("pair realization does not reproduce its type")
    if not _has_gaps(wt + vt, constants, gap):
        raise InternalCheckFailed("pair realization misses the gap bound")
    return wt, vt


def _has_gaps(values: tuple[Word, ...], constants: ConstantSet, gap: int) -> bool:
    nodes = mcat_nodes(values, constants)
    for e in nodes:
        if e == EPSILON or is_constant_prefix(e, constants):
            continue
        p = EPSILON
        for v in nodes:
            if len(p) < len(v) < len(e) and prefix_leq(v, e):
                p = v
        if len(e) - len(p) <= gap:
            return False
    return True


def _candidate_words(values, constants: ConstantSet, pad: int) -> list[Word]:
    """Concrete placements of one fresh word relative to existing values,
    mirroring the symbolic insertion cases."""
    nodes = mcat_nodes(values, constants)
    node_set = set(nodes)
    cands: list[Word] = list(nodes)
    parents = {}
    for e in nodes:
        if e == EPSILON:
            continue
        p = EPSILON
        for v in nodes:
            if len(p) < len(v) < len(e) and prefix_leq(v, e):
                p = v
        parents[e] = p
    # strictly inside an edge
    for e, p in parents.items():
        room = len(e) - len(p)
        if room >= 2:
            cands.append(e[: len(p) + max(1, room // 2)])
    # fresh child directions, including between/beyond existing siblings
    for m in nodes:
        kid_labels = sorted({e[len(m)] for e in nodes if strict_prefix(m, e) and parents[e] == m})
        fresh: list[Fraction] = []
        if not kid_labels:
            fresh.append(ONE)
        else:
            fresh.append(kid_labels[0] - 1)
            for a, b in zip(kid_labels, kid_labels[1:]):
                fresh.append((a + b) / 2)
            fresh.append(kid_labels[-1] + 1)
        for q in fresh:
            cands.append(m + (q,) + (ZERO,) * pad)
    # split an edge and hang off to either side
    for e, p in parents.items():
        room = len(e) - len(p)
        if room >= 2:
            mid = e[: len(p) + max(1, room // 2)]
            cont = e[len(mid)]
            for q in (cont - 1, cont + 1):
                cands.append(mid + (q,) + (ZERO,) * pad)
    seen = set()
    out = []
    for w in cands:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def _search_extension(values, n, constants, pad, accept):
    """Depth-first search over concrete placements of n fresh words.

    `accept(zt)` judges a complete tuple; the first hit wins.  `values`
    carries the words the placements are relative to (grows as we assign)."""

    def rec(chosen):
        if len(chosen) == n:
            return tuple(chosen) if accept(tuple(chosen)) else None
        base = values + tuple(chosen)
        for w in _candidate_words(base, constants, pad):
            got = rec(chosen + [w])
            if got is not None:
                return got
        return None

    return rec([])


def extend_realization(vt: tuple[Word, ...], t2: OrderType, constants: ConstantSet):
    """A tuple u with pair_type(vt, u) == t2; vt needs wide gaps for this to
    always succeed (re-gap first when in doubt)."""
    n = len(vt)
    if t2.first_arity != n or t2.second_arity != n:
        raise TypeMismatch("extension type arity differs from the tuple")
    from .mcat import first_restriction

    if first_restriction(t2) != tuple_type(vt, constants):
        raise TypeMismatch("tuple type does not match the first restriction")
    pad = 2 ** (n + 1)
    got = _search_extension(
        vt,
        n,
        constants,
        pad,
        lambda zt: pair_type(vt, zt, constants) == t2,
    )
    if got is None:
        raise PreconditionViolated(
            "no extension found; the base tuple lacks room (insufficient gaps)"
        )
    return got


def extend_to_composite(
    wt: tuple[Word, ...],
    vt: tuple[Word, ...],
    step: OrderType,
    target: OrderType,
    constants: ConstantSet,
):
    """A tuple u with pair_type(vt,u) == step and pair_type(wt,u) == target.

    Exists whenever target is in the composition of pair_type(wt,vt) with
    step and the joint tree of (wt, vt) has wide gaps."""
    n = len(vt)
    pad = 2 ** (n + 1)
    got = _search_extension(
        wt + vt,
        n,
        constants,
        pad,
        lambda zt: pair_type(vt, zt, constants) == step
        and pair_type(wt, zt, constants) == target,
    )
    if got is None:
        raise InternalCheckFailed("composite extension not realizable; gaps too small")
    return got


def widen_run_gaps(run: Run, constants: ConstantSet, gap: int) -> Run:
    """Insert `gap` zeros at every non-constant node of the joint ancestor
    tree of the first and last configurations, deepest first, across the
    whole run.  Preserves validity and all types."""
    anchor = run[0].values + run[-1].values
    out = list(run)
    for u in sorted(mcat_nodes(anchor, constants), key=len, reverse=True):
        if u == EPSILON and constants.closure:
            continue
        if is_constant_prefix(u, constants):
            continue
        out = [
            Config(c.state, tuple(insert_gap(u, gap, v) for v in c.values)) for c in out
        ]
    return out


def stretch_upper_bound(a: Config, b: Config, constants: ConstantSet) -> Config:
    """A configuration above both a and b in the stretch order.

    Built by inserting a gap of the largest interval length of a's tree at
    every non-constant node of b's tree, deepest first."""
    if a.state != b.state:
        raise TypeMismatch("states differ")
    if tuple_type(a.values, constants) != tuple_type(b.values, constants):
        raise TypeMismatch("tuple types differ")
    if a == b:
        return a
    d = max(len(u) for u in mcat_nodes(a.values, constants))
    values = list(b.values)
    for y in sorted(mcat_nodes(b.values, constants), key=len, reverse=True):
        if is_constant_prefix(y, constants):
            continue
        if y == EPSILON and constants.closure:
            continue
        values = [insert_gap(y, d, v) for v in values]
    c = Config(b.state, tuple(values))
    if not (stretch_leq(a, c, constants) and stretch_leq(b, c, constants)):
        raise InternalCheckFailed("upper bound construction failed its post-check")
    return c


class StretchInjection:
    """Order embedding of the whole tree extending the induced isomorphism
    of a stretch-related pair of tuples.

    Images are built label by label: below the anchor skeleton the embedding
    tracks the target skeleton, consuming one target label per source label
    (the stretch inequality guarantees room); off the skeleton it allocates
    fresh sibling directions consistently."""

    def __init__(self, anchor: tuple[Word, ...], target: tuple[Word, ...], constants: ConstantSet):
        h = induced_iso_pair(anchor, target, constants)
        if h is None:
            raise PreconditionViolated("tuples are not of equal type")
        self.constants = constants
        self.skeleton = set(mcat_nodes(anchor, constants))
        self.h = h
        self.memo: dict[Word, Word] = dict(h)
        self.memo[EPSILON] = EPSILON
        self.dirmaps: dict[Word, dict[Fraction, Fraction]] = {}

    def apply(self, w: Word) -> Word:
        if w in self.memo:
            return self.memo[w]
        p = w[:-1]
        fp = self.apply(p)
        q = w[-1]
        above = [a for a in self.skeleton if prefix_leq(w, a)]
        if above:
            meet = above[0]
            for a in above[1:]:
                meet = gcp(meet, a)
            img_of_meet = self.h[meet]
            img = img_of_meet[: len(fp) + 1]
            self._pin_direction(p, q, img[len(fp)], fp)
        else:
            label = self._fresh_direction(p, q, fp)
            img = fp + (label,)
        self.memo[w] = img
        return img

    def _known_directions(self, p: Word, fp: Word) -> dict[Fraction, Fraction]:
        dirs = dict(self.dirmaps.get(p, {}))
        classes: dict[Fraction, Word] = {}
        for a in self.skeleton:
            if strict_prefix(p, a):
                d = a[len(p)]
                classes[d] = a if d not in classes else gcp(classes[d], a)
        for d, rep in classes.items():
            img = self.h[self._skeleton_meet(rep)]
            dirs.setdefault(d, img[len(fp)])
        return dirs

    def _skeleton_meet(self, rep: Word) -> Word:
        # rep is already a skeleton node (meet-closure of a class stays inside)
        return rep

    def _pin_direction(self, p: Word, q, img_label, fp: Word):
        self.dirmaps.setdefault(p, {})[q] = img_label

    def _fresh_direction(self, p: Word, q, fp: Word) -> Fraction:
        dirs = self._known_directions(p, fp)
        if q in dirs:
            return dirs[q]
        keys = sorted(dirs)
        lower = None
        upper = None
        for k in keys:
            if k < q:
                lower = dirs[k]
            elif k > q and upper is None:
                upper = dirs[k]
        if lower is None and upper is None:
            label = q
        elif lower is None:
            label = upper - 1
        elif upper is None:
            label = lower + 1
        else:
            label = (lower + upper) / 2
        self.dirmaps.setdefault(p, {})[q] = label
        return label


def lift_run(
    run: Run,
    target: Config,
    direction: str,
    aut: ConstraintAutomaton,
) -> Run:
    """Transport a run so that its first (forward) or last (backward)
    configuration becomes exactly `target`, keeping length and all types.

    Requires the moved endpoint to be stretch-below the target."""
    if direction not in ("forward", "backward"):
        raise PreconditionViolated(f"unknown direction {direction!r}")
    if not run:
        raise PreconditionViolated("empty run")
    anchor = run[0] if direction == "forward" else run[-1]
    if anchor.state != target.state or not stretch_leq(anchor, target, aut.constants):
        raise PreconditionViolated("endpoint is not stretch-below the target")
    inj = StretchInjection(anchor.values, target.values, aut.constants)
    lifted = [Config(c.state, tuple(inj.apply(v) for v in c.values)) for c in run]
    endpoint = lifted[0] if direction == "forward" else lifted[-1]
    if endpoint != target:
        raise InternalCheckFailed("lifted endpoint missed the target")
    if not check_run(aut, lifted):
        raise InternalCheckFailed("lifted run fails the run checker")
    return lifted
