"""Independent ground truth at desk scale.

`bounded_emptiness` searches for a lasso that repeats a configuration
literally, over words of bounded length with labels from a finite set.  Any
lasso it returns is a genuine accepting-run witness (exact repetition pumps
trivially); finding none proves nothing.  `brute_compose` rebuilds the type
product from concrete triples.  Both stay deliberately independent of the
type algebra: relations are evaluated on concrete words via boolean matrices.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .automata import Config, ConstraintAutomaton, Run, RunType, check_run, make_automaton
from .errors import InternalCheckFailed
from .formulas import (
    FAnd,
    FAtom,
    FFinally,
    FGlobally,
    FNext,
    FNot,
    FOr,
    FUntil,
    Formula,
)
from .guards import And, Atom, Guard, Or
from .mcat import pair_type
from .words import ConstantSet, Word, lex_leq, prefix_leq

_REL_TABLES: dict = {}


@dataclass(frozen=True)
class SearchBounds:
    max_word_length: int = 3
    labels: tuple = (Fraction(1), Fraction(2), Fraction(3))
    max_steps: int = 200
    max_configs: int = 10_000


def bounded_words(bounds: SearchBounds) -> list[Word]:
    labels = tuple(Fraction(x) for x in bounds.labels)
    out: list[Word] = [()]
    for length in range(1, bounds.max_word_length + 1):
        out.extend(tuple(c) for c in itertools.product(labels, repeat=length))
    return out


def _tables(words: list[Word]):
    key = tuple(words)
    got = _REL_TABLES.get(key)
    if got is not None:
        return got
    n = len(words)
    eq = np.eye(n, dtype=bool)
    pref = np.zeros((n, n), dtype=bool)
    lex = np.zeros((n, n), dtype=bool)
    for i, a in enumerate(words):
        for j, b in enumerate(words):
            pref[i, j] = prefix_leq(a, b)
            lex[i, j] = lex_leq(a, b)
    got = {"eq": eq, "pref": pref, "lex": lex}
    _REL_TABLES[key] = got
    return got


class _BoundedSpace:
    """Value tuples as indices, transition guards as boolean matrices."""

    def __init__(self, aut: ConstraintAutomaton, bounds: SearchBounds):
        self.aut = aut
        self.words = bounded_words(bounds)
        self.windex = {w: i for i, w in enumerate(self.words)}
        self.tables = _tables(self.words)
        self.n = aut.dim
        w = len(self.words)
        self.count = w**self.n
        self.comp = np.stack(
            np.unravel_index(np.arange(self.count), (w,) * self.n)
        )  # shape (n, count)
        self.matrices = [self._guard_matrix(t.guard) for t in aut.transitions]

    def tuple_of(self, idx: int) -> tuple[Word, ...]:
        return tuple(self.words[self.comp[i, idx]] for i in range(self.n))

    def _term_array(self, term):
        kind, payload = term
        if kind == "c":
            value = self.aut.constants.value_of(payload)
            idx = self.windex.get(value)
            if idx is None:
                raise InternalCheckFailed("constant outside the bounded word space")
            return ("scalar", idx)
        return ("row" if kind == "x" else "col", self.comp[payload - 1])

    def _guard_matrix(self, guard: Guard) -> np.ndarray:
        if isinstance(guard, Atom):
            table = self.tables[guard.rel]
            (ka, va) = self._term_array(guard.left)
            (kb, vb) = self._term_array(guard.right)
            if ka == "scalar" and kb == "scalar":
                m = np.full((self.count, self.count), bool(table[va, vb]))
            elif ka == "scalar":
                v = table[va, vb]
                m = np.broadcast_to(
                    v[:, None] if kb == "row" else v[None, :], (self.count, self.count)
                ).copy()
            elif kb == "scalar":
                v = table[va, vb]
                m = np.broadcast_to(
                    v[:, None] if ka == "row" else v[None, :], (self.count, self.count)
                ).copy()
            elif ka == kb:
                v = table[va, vb]
                m = np.broadcast_to(
                    v[:, None] if ka == "row" else v[None, :], (self.count, self.count)
                ).copy()
            else:
                if ka == "row":
                    m = table[va[:, None], vb[None, :]]
                else:
                    m = table[va[None, :], vb[:, None]]
            return ~m if guard.negated else m
        if isinstance(guard, And):
            m = np.ones((self.count, self.count), dtype=bool)
            for p in guard.parts:
                m &= self._guard_matrix(p)
            return m
        if isinstance(guard, Or):
            m = np.zeros((self.count, self.count), dtype=bool)
            for p in guard.parts:
                m |= self._guard_matrix(p)
            return m
        raise TypeError(f"unknown guard node {guard!r}")

    def step(self, reach: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        out = {q: np.zeros(self.count, dtype=bool) for q in self.aut.states}
        for t, m in zip(self.aut.transitions, self.matrices):
            src = reach[t.source]
            if src.any():
                out[t.target] |= m[src].any(axis=0)
        return out

    def successors(self, state: str, idx: int):
        for t, m in zip(self.aut.transitions, self.matrices):
            if t.source != state:
                continue
            for j in np.nonzero(m[idx])[0]:
                yield (t.target, int(j))


def _forward_closure(space: _BoundedSpace, seeds, bounds: SearchBounds):
    reach = {q: np.zeros(space.count, dtype=bool) for q in space.aut.states}
    for q, vec in seeds.items():
        reach[q] |= vec
    for _ in range(bounds.max_steps):
        new = space.step(reach)
        grown = False
        for q in space.aut.states:
            merged = reach[q] | new[q]
            if not np.array_equal(merged, reach[q]):
                reach[q] = merged
                grown = True
        total = sum(int(v.sum()) for v in reach.values())
        if total > bounds.max_configs:
            return None
        if not grown:
            return reach
    return None  # not a fixpoint within max_steps: give up, stay sound


def bounded_emptiness(aut: ConstraintAutomaton, bounds: SearchBounds):
    """Search for an exact-repetition lasso; returns (prefix_run, loop_run)
    with loop_run[0] == loop_run[-1] == prefix_run[-1], or None."""
    space = _BoundedSpace(aut, bounds)
    seeds = {
        q: np.ones(space.count, dtype=bool) if q in aut.initial else np.zeros(space.count, dtype=bool)
        for q in aut.states
    }
    reach = _forward_closure(space, seeds, bounds)
    if reach is None:
        return None

    final_mask = {
        q: (reach[q] if q in aut.final else np.zeros(space.count, dtype=bool))
        for q in aut.states
    }
    # shrink to final configs that are reachable in >= 1 step from the set
    current = final_mask
    for _ in range(bounds.max_configs):
        onwards = _forward_closure(space, {q: space.step(current)[q] for q in aut.states}, bounds)
        if onwards is None:
            return None
        nxt = {q: current[q] & onwards[q] for q in aut.states}
        if all(np.array_equal(nxt[q], current[q]) for q in aut.states):
            break
        current = nxt
    if not any(v.any() for v in current.values()):
        return None
    target = None
    for q in aut.states:
        hits = np.nonzero(current[q])[0]
        if hits.size:
            target = (q, int(hits[0]))
            break

    prefix = _bfs_path(space, [(q, int(i)) for q in aut.initial for i in range(space.count)], target, bounds)
    loop_mid = _bfs_path(space, list(space.successors(*target)), target, bounds)
    if prefix is None or loop_mid is None:
        return None
    prefix_run = [Config(q, space.tuple_of(i)) for q, i in prefix]
    loop_run = [Config(q, space.tuple_of(i)) for q, i in [target] + loop_mid]
    if not (check_run(aut, prefix_run) and check_run(aut, loop_run)):
        raise InternalCheckFailed("oracle lasso failed the run checker")
    if loop_run[0] != loop_run[-1] or prefix_run[-1] != loop_run[0]:
        raise InternalCheckFailed("oracle lasso does not repeat its junction")
    return prefix_run, loop_run


def _bfs_path(space: _BoundedSpace, sources, target, bounds: SearchBounds):
    """Shortest config path from any source to the target (inclusive)."""
    parent: dict = {}
    queue = []
    for s in sources:
        if s not in parent:
            parent[s] = None
            queue.append(s)
    qi = 0
    while qi < len(queue):
        cur = queue[qi]
        qi += 1
        if cur == target:
            path = []
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            return list(reversed(path))
        if len(parent) > 4 * bounds.max_configs + 4:
            return None
        for nxt in space.successors(*cur):
            if nxt not in parent:
                parent[nxt] = cur
                queue.append(nxt)
    return None


def brute_compose(t1: RunType, t2: RunType, constants: ConstantSet, bounds: SearchBounds) -> set[RunType]:
    """Composite run types witnessed by concrete word triples within bounds;
    always a subset of the algebraic composition."""
    if t1.end != t2.start:
        return set()
    n = t1.typ.first_arity
    words = bounded_words(bounds)
    tuples = list(itertools.product(words, repeat=n))
    ptype: dict = {}

    def pt(a, b):
        got = ptype.get((a, b))
        if got is None:
            got = pair_type(a, b, constants)
            ptype[(a, b)] = got
        return got

    first_matches: dict = {}
    for a in tuples:
        for b in tuples:
            if pt(a, b) == t1.typ:
                first_matches.setdefault(b, []).append(a)
    out: set[RunType] = set()
    for b, firsts in first_matches.items():
        for c in tuples:
            if pt(b, c) != t2.typ:
                continue
            for a in firsts:
                out.add(RunType(t1.start, pt(a, c), t2.end))
    return out


# -- reproducible random instances --------------------------------------------


@dataclass(frozen=True)
class InstanceProfile:
    kind: str = "automaton"  # automaton | formula | words
    dim_max: int = 2
    states_max: int = 3
    constants_max: int = 1
    atoms_max: int = 3
    labels: tuple = (1, 2, 3)
    word_len_max: int = 3
    temporal_depth: int = 2
    transitions_max: int = 4


def random_instances(seed: int, profile: InstanceProfile):
    """Infinite reproducible stream of instances for property suites."""
    rng = random.Random(seed)
    while True:
        if profile.kind == "automaton":
            yield random_automaton(rng, profile)
        elif profile.kind == "formula":
            yield random_formula_instance(rng, profile)
        else:
            yield random_word_tuple(rng, profile)


def random_word(rng: random.Random, profile: InstanceProfile, max_len=None) -> Word:
    length = rng.randint(0, max_len if max_len is not None else profile.word_len_max)
    return tuple(Fraction(rng.choice(profile.labels)) for _ in range(length))


def random_word_tuple(rng: random.Random, profile: InstanceProfile) -> tuple[Word, ...]:
    n = rng.randint(1, profile.dim_max)
    return tuple(random_word(rng, profile) for _ in range(n))


def _random_constants(rng: random.Random, profile: InstanceProfile) -> list:
    if profile.constants_max < 1 or rng.random() < 0.5:
        return []
    value = random_word(rng, profile, max_len=2)
    if not value:
        value = (Fraction(rng.choice(profile.labels)),)
    return [("c1", value)]


def _random_guard_text(rng: random.Random, dim: int, const_names: list, atoms: int) -> str:
    def atom() -> str:
        rel = rng.choice(["eq", "pref", "lex"])
        terms = []
        for _ in range(2):
            pool = ["x", "y"]
            kind = rng.choice(pool + (["c"] if const_names else []))
            if kind == "c":
                terms.append(rng.choice(const_names))
            else:
                terms.append(f"{kind}{rng.randint(1, dim)}")
        body = f"{rel}({terms[0]},{terms[1]})"
        return f"!{body}" if rng.random() < 0.4 else body

    text = atom()
    for _ in range(atoms - 1):
        op = rng.choice(["&", "|"])
        text = f"({text} {op} {atom()})"
    return text


def random_automaton(rng: random.Random, profile: InstanceProfile) -> ConstraintAutomaton:
    dim = rng.randint(1, profile.dim_max)
    n_states = rng.randint(1, profile.states_max)
    states = [f"q{i}" for i in range(n_states)]
    initial = rng.sample(states, rng.randint(1, n_states))
    final = rng.sample(states, rng.randint(1, n_states))
    constants = _random_constants(rng, profile)
    const_names = [name for name, _ in constants]
    transitions = []
    for _ in range(rng.randint(1, profile.transitions_max)):
        src = rng.choice(states)
        dst = rng.choice(states)
        guard = _random_guard_text(rng, dim, const_names, rng.randint(1, profile.atoms_max))
        transitions.append((src, guard, dst))
    return make_automaton(dim, constants, states, initial, final, transitions)


def random_formula_instance(rng: random.Random, profile: InstanceProfile):
    """(constants, formula) pair with constant labels inside 1..2."""
    constants = []
    if profile.constants_max >= 1 and rng.random() < 0.6:
        length = rng.randint(1, 2)
        constants.append(
            ("c1", tuple(Fraction(rng.randint(1, 2)) for _ in range(length)))
        )
    cs = ConstantSet.from_entries(constants)
    const_names = [name for name, _ in constants]

    def atom() -> Formula:
        rel = rng.choice(["eq", "pref", "lex"])
        terms = []
        for _ in range(2):
            if const_names and rng.random() < 0.3:
                terms.append(("const", rng.choice(const_names)))
            else:
                terms.append(("var", 1, rng.randint(0, 1)))
        return FAtom(rel, terms[0], terms[1])

    def build(depth: int) -> Formula:
        if depth <= 0 or rng.random() < 0.3:
            a = atom()
            return FNot(a) if rng.random() < 0.3 else a
        op = rng.choice(["and", "or", "not", "X", "G", "F", "U"])
        if op == "and":
            return FAnd(build(depth - 1), build(depth - 1))
        if op == "or":
            return FOr(build(depth - 1), build(depth - 1))
        if op == "not":
            return FNot(build(depth - 1))
        if op == "X":
            return FNext(build(depth - 1))
        if op == "G":
            return FGlobally(build(depth - 1))
        if op == "F":
            return FFinally(build(depth - 1))
        return FUntil(build(depth - 1), build(depth - 1))

    return cs, build(profile.temporal_depth)
