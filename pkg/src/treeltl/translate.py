"""Formula-to-automaton translation and the satisfiability / model-checking
drivers, including the finite-branching reduction.

The translation is the classic tableau: states are obligation sets split
into literals (checked by the outgoing guard) and next-step obligations;
eventualities are tracked with a counter over the until-type subformulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import guards
from .algebra import TypeContext
from .automata import (
    Config,
    ConstraintAutomaton,
    Run,
    Transition,
    make_automaton,
    product,
    universal_automaton,
)
from .engine import Certificate, EmptinessResult, decide_emptiness
from .errors import (
    ConstantMismatch,
    ConstantOutOfRange,
    InternalCheckFailed,
    PreconditionViolated,
    ResourceCeiling,
)
from .formulas import (
    FAnd,
    FAtom,
    FFalse,
    FFinally,
    FGlobally,
    FNext,
    FNot,
    FOr,
    FRelease,
    FTrue,
    FUntil,
    Formula,
    LassoWord,
    eliminate_exponents,
    eval_formula,
    formula_variables,
    max_term_shift,
    to_nnf,
)
from .realize import lift_run
from .words import (
    ConstantSet,
    Word,
    embed_words,
    prefix_leq,
    word_to_text,
)

_STATE_CEILING = 100_000


def normalize(f: Formula, dim: int | None = None):
    """Exponent elimination followed by negation normal form.

    Returns (formula, dimension)."""
    g, n = eliminate_exponents(f, dim)
    return to_nnf(g), n


# -- tableau translation ------------------------------------------------------


def _expand(obligations: tuple) -> list[tuple[tuple, tuple]]:
    """All consistent (literals, nexts) completions of an obligation set."""
    results: list[tuple[tuple, tuple]] = []

    def rec(todo: list, literals: set, nexts: set):
        if not todo:
            results.append(
                (
                    tuple(sorted(literals, key=lambda a: a.to_text())),
                    tuple(sorted(nexts, key=lambda a: a.to_text())),
                )
            )
            return
        phi = todo.pop()
        try:
            if isinstance(phi, FTrue):
                rec(todo, literals, nexts)
            elif isinstance(phi, FFalse):
                pass
            elif isinstance(phi, FAtom) or (
                isinstance(phi, FNot) and isinstance(phi.sub, FAtom)
            ):
                flipped = phi.sub if isinstance(phi, FNot) else FNot(phi)
                if flipped in literals:
                    return
                rec(todo, literals | {phi}, nexts)
            elif isinstance(phi, FAnd):
                rec(todo + [phi.left, phi.right], literals, nexts)
            elif isinstance(phi, FOr):
                rec(todo + [phi.left], set(literals), set(nexts))
                rec(todo + [phi.right], set(literals), set(nexts))
            elif isinstance(phi, FNext):
                rec(todo, literals, nexts | {phi.sub})
            elif isinstance(phi, FUntil):
                rec(todo + [phi.right], set(literals), set(nexts))
                rec(todo + [phi.left], set(literals), set(nexts) | {phi})
            elif isinstance(phi, FRelease):
                rec(todo + [phi.right, phi.left], set(literals), set(nexts))
                rec(todo + [phi.right], set(literals), set(nexts) | {phi})
            elif isinstance(phi, FGlobally):
                rec(todo + [phi.sub], literals, nexts | {phi})
            elif isinstance(phi, FFinally):
                rec(todo + [phi.sub], set(literals), set(nexts))
                rec(todo, set(literals), set(nexts) | {phi})
            else:
                raise TypeError(f"non-normalized node {phi!r}")
        finally:
            pass

    rec(list(obligations), set(), set())
    # dedupe branches, stable order
    seen = set()
    out = []
    for item in results:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def _literal_guard(literals: tuple) -> guards.Guard:
    parts = []
    for lit in literals:
        negated = isinstance(lit, FNot)
        atom = lit.sub if negated else lit

        def conv(t):
            if t[0] == "const":
                return ("c", t[1])
            _, idx, shift = t
            if shift == 0:
                return ("x", idx)
            if shift == 1:
                return ("y", idx)
            raise PreconditionViolated("translation needs term shifts at most 1")

        parts.append(guards.Atom(atom.rel, conv(atom.left), conv(atom.right), negated))
    if not parts:
        return guards.TRUE
    return guards.guard_and(parts)


def translate(f: Formula, constants: ConstantSet) -> ConstraintAutomaton:
    """Automaton accepting exactly the data words that model the formula.

    The formula must be in negation normal form with term shifts at most 1
    (run `normalize` first)."""
    if max_term_shift(f) > 1:
        raise PreconditionViolated("eliminate exponents before translating")
    dim = max(formula_variables(f), default=1)

    untils: list = []

    def collect(node):
        if isinstance(node, (FUntil, FFinally)) and node not in untils:
            untils.append(node)
        if isinstance(node, (FNot, FNext, FGlobally, FFinally)):
            collect(node.sub)
        elif isinstance(node, (FAnd, FOr, FUntil, FRelease)):
            collect(node.left)
            collect(node.right)

    collect(f)
    untils.sort(key=lambda n: n.to_text())
    k = len(untils)

    atoms: dict[tuple, int] = {}
    order: list[tuple] = []
    edges: dict[int, list[int]] = {}
    initial_atoms = _expand((f,))
    queue = []
    for a in initial_atoms:
        if a not in atoms:
            atoms[a] = len(order)
            order.append(a)
            queue.append(a)
    while queue:
        a = queue.pop(0)
        succs = _expand(a[1])
        ids = []
        for b in succs:
            if b not in atoms:
                atoms[b] = len(order)
                order.append(b)
                queue.append(b)
                if len(order) > _STATE_CEILING:
                    raise ResourceCeiling("tableau construction exceeded the state ceiling")
            ids.append(atoms[b])
        edges[atoms[a]] = ids

    def postponed(a: tuple, u) -> bool:
        return u in a[1]

    # degeneralize with a counter when there are eventualities
    copies = range(max(k, 1))
    phases = max(k, 1)

    def name(i: int, c: int) -> str:
        return f"s{i}c{c}" if k else f"s{i}"

    states = [name(i, c) for i in range(len(order)) for c in (copies if k else [0])]
    initial = [name(atoms[a], 0) for a in initial_atoms]
    if k:
        final = [
            name(i, 0)
            for i, a in enumerate(order)
            if not postponed(a, untils[0])
        ]
    else:
        final = list(states)
    transitions = []
    for i, a in enumerate(order):
        guard = _literal_guard(a[0])
        for j in edges[i]:
            if not k:
                transitions.append((name(i, 0), guard, name(j, 0)))
            else:
                for c in copies:
                    c2 = (c + 1) % phases if not postponed(a, untils[c]) else c
                    transitions.append((name(i, c), guard, name(j, c2)))
    aut = make_automaton(dim, constants.entries, states, initial, final, transitions)
    return aut


# -- satisfiability and model checking ----------------------------------------


@dataclass
class Verdict:
    """Outcome of a sat/mc/emptiness query with artifacts and statistics."""

    kind: str  # SAT | UNSAT | EMPTY | NONEMPTY
    certificate: Certificate | None
    automaton: ConstraintAutomaton | None = None
    original_arity: int = 0
    stats: dict = field(default_factory=dict)


def _check_k_labels(constants: ConstantSet, k: int):
    for _, value in constants.entries:
        for label in value:
            if label.denominator != 1 or not (1 <= label.numerator <= k):
                raise ConstantOutOfRange(
                    f"constant label {label} outside 1..{k}"
                )


def kary_reduce(f: Formula, k: int, constants: ConstantSet):
    """Confine all variables near a completed constant frontier.

    Returns (formula, constants) over the infinitely branching tree; maximal
    constants of the completed set meet every branch of the k-ary tree."""
    if k < 2:
        raise ConstantOutOfRange("branching degree must be at least 2")
    _check_k_labels(constants, k)
    closure = set(constants.closure) | {()}
    maximal = {c for c in closure if not any(c != d and prefix_leq(c, d) for d in closure)}

    def dominated(p):
        return any(prefix_leq(c, p) for c in maximal)

    # complete = every branch of the k-ary tree meets a maximal constant
    complete = all(
        dominated(p) or all(p + (label,) in closure for label in _k_labels(k))
        for p in closure
    )
    entries = list(constants.entries)
    taken = {name for name, _ in entries}
    values = {v for _, v in entries}
    if not complete:
        for p in sorted(closure, key=lambda w: (len(w), w)):
            for label in _k_labels(k):
                w = p + (label,)
                if w not in closure and w not in values:
                    base = "_b" + "_".join(str(q.numerator) for q in w)
                    nm = base
                    i = 2
                    while nm in taken:
                        nm = f"{base}_{i}"
                        i += 1
                    taken.add(nm)
                    values.add(w)
                    entries.append((nm, w))
    new_constants = ConstantSet.from_entries(entries)
    closure2 = set(new_constants.closure) | {()}
    frontier = sorted(
        (c for c in closure2 if not any(c != d and prefix_leq(c, d) for d in closure2)),
        key=lambda w: (len(w), w),
    )
    by_value = {}
    for nm, v in new_constants.entries:
        by_value.setdefault(v, nm)
    conj = None
    for i in sorted(formula_variables(f)) or [1]:
        disj = None
        for c in frontier:
            nm = by_value.get(c)
            if nm is None:
                continue
            part = FOr(
                FAtom("pref", ("var", i, 0), ("const", nm)),
                FAtom("pref", ("const", nm), ("var", i, 0)),
            )
            disj = part if disj is None else FOr(disj, part)
        if disj is None:
            raise InternalCheckFailed("empty constant frontier after completion")
        conj = disj if conj is None else FAnd(conj, disj)
    psi = FAnd(f, FGlobally(conj))
    return psi, new_constants


def _k_labels(k: int):
    from fractions import Fraction

    return [Fraction(i) for i in range(1, k + 1)]


def solve_sat(f: Formula, k, constants: ConstantSet) -> Verdict:
    """Satisfiability over the k-branching tree (k an int >= 2 or "inf")."""
    orig_arity = max(formula_variables(f), default=1)
    work = f
    cs = constants
    if k != "inf":
        work, cs = kary_reduce(f, int(k), constants)
    nf, dim = normalize(work)
    aut = translate(nf, cs)
    res = decide_emptiness(aut)
    kind = "UNSAT" if res.empty else "SAT"
    return Verdict(kind, res.certificate, aut, orig_arity, res.stats)


def sat(f: Formula, k, constants: ConstantSet):
    """(satisfiable?, certificate-or-None)."""
    v = solve_sat(f, k, constants)
    return v.kind == "SAT", v.certificate


def solve_mc(
    aut: ConstraintAutomaton, f: Formula, k, constants: ConstantSet
) -> Verdict:
    """Is some data word accepted by the automaton a model of the formula?"""
    if set(aut.constants.closure) != set(constants.closure):
        raise ConstantMismatch("automaton and formula declare different constants")
    orig_arity = max(max(formula_variables(f), default=1), aut.dim)
    work = f
    cs = constants
    model = aut
    if k != "inf":
        work, cs = kary_reduce(f, int(k), constants)
        model = _extend_constants(aut, cs)
    nf, dim = normalize(work)
    spec_aut = translate(nf, cs)
    prod = product(model, spec_aut)
    res = decide_emptiness(prod)
    kind = "EMPTY" if res.empty else "NONEMPTY"
    return Verdict(kind, res.certificate, prod, orig_arity, res.stats)


def mc(aut: ConstraintAutomaton, f: Formula, k, constants: ConstantSet):
    """(some accepted word models f?, certificate-or-None)."""
    v = solve_mc(aut, f, k, constants)
    return v.kind == "NONEMPTY", v.certificate


def _extend_constants(aut: ConstraintAutomaton, cs: ConstantSet) -> ConstraintAutomaton:
    return ConstraintAutomaton(
        aut.dim, cs, aut.states, aut.initial, aut.final, aut.transitions
    )


# -- witnesses ----------------------------------------------------------------


def certificate_lasso(cert: Certificate, arity: int | None = None) -> LassoWord | None:
    """Exact ultimately periodic word from a certificate whose loop repeats
    its junction configuration literally; None when the loop only stretches."""
    if cert.loop_run[0] != cert.loop_run[-1]:
        return None
    prefix = tuple(c.values for c in cert.prefix_run[:-1])
    loop = tuple(c.values for c in cert.loop_run[:-1])
    if arity is not None:
        prefix = tuple(v[:arity] for v in prefix)
        loop = tuple(v[:arity] for v in loop)
    return LassoWord(prefix, loop)


def unroll_certificate(
    aut: ConstraintAutomaton, cert: Certificate, pumps: int
) -> Run:
    """Finite run prefix of the infinite accepting run: the prefix run
    followed by `pumps` lifted copies of the loop."""
    out: Run = list(cert.prefix_run)
    loop = cert.loop_run
    for _ in range(pumps):
        out.extend(loop[1:])
        loop = lift_run(loop, loop[-1], "forward", aut)
    return out


def project_kary_witness(
    tuples: list[tuple[Word, ...]], constants: ConstantSet
) -> list[tuple[Word, ...]]:
    """Map confined tree values into the binary tree: values at or below a
    maximal constant split there and their tails embed order-preservingly."""
    closure = set(constants.closure) | {()}
    maximal = sorted(
        (c for c in closure if not any(c != d and prefix_leq(c, d) for d in closure)),
        key=len,
        reverse=True,
    )
    tails: list[Word] = []
    plan = []
    for tup in tuples:
        row = []
        for value in tup:
            if any(prefix_leq(value, c) for c in maximal):
                row.append(("keep", value))
                continue
            anchor = next((c for c in maximal if prefix_leq(c, value)), None)
            if anchor is None:
                raise InternalCheckFailed(
                    f"witness value {word_to_text(value)} escapes the constant frontier"
                )
            row.append(("split", anchor, len(tails)))
            tails.append(value[len(anchor):])
        plan.append(row)
    embedded = embed_words(tails)
    out = []
    for row in plan:
        tup = []
        for item in row:
            if item[0] == "keep":
                tup.append(item[1])
            else:
                _, anchor, idx = item
                tup.append(anchor + embedded[idx])
        out.append(tuple(tup))
    return out
