"""Tree-constraint Buechi automata.

Transitions are labelled by guards over the current values (x1..xn), the
next values (y1..yn), and the declared constants.  A run is a sequence of
configurations (state, value tuple); an infinite run accepts when it starts
in an initial state and visits a final state infinitely often.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

from .algebra import TypeContext
from .errors import ArityMismatch, ConstantMismatch, ParseError
from .guards import Guard, eval_guard, guard_and, parse_guard
from .mcat import OrderType
from .words import ConstantSet, Word, word_from_text, word_to_text


class Config(NamedTuple):
    state: str
    values: tuple[Word, ...]


Run = list[Config]


class RunType(NamedTuple):
    """Start state, pair order type of (first values, last values), end state."""

    start: str
    typ: OrderType
    end: str


@dataclass(frozen=True)
class Transition:
    source: str
    guard: Guard
    target: str


@dataclass(frozen=True)
class ConstraintAutomaton:
    dim: int
    constants: ConstantSet
    states: tuple[str, ...]
    initial: tuple[str, ...]
    final: tuple[str, ...]
    transitions: tuple[Transition, ...]

    def __post_init__(self):
        declared = set(self.states)
        for s in self.initial + self.final:
            if s not in declared:
                raise ParseError(f"state {s!r} not declared")
        for t in self.transitions:
            if t.source not in declared or t.target not in declared:
                raise ParseError(f"transition endpoint {t.source!r}->{t.target!r} not declared")

    def transitions_from(self, state: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == state]


def make_automaton(dim, constants, states, initial, final, transitions) -> ConstraintAutomaton:
    """Build an automaton from guard source strings."""
    cs = constants if isinstance(constants, ConstantSet) else ConstantSet.from_entries(constants)
    trans = []
    for src, guard, dst in transitions:
        if isinstance(guard, str):
            guard = parse_guard(guard, dim, cs)
        trans.append(Transition(src, guard, dst))
    return ConstraintAutomaton(
        dim, cs, tuple(states), tuple(initial), tuple(final), tuple(trans)
    )


def universal_automaton(dim: int, constants: ConstantSet) -> ConstraintAutomaton:
    """Single-state automaton accepting every data word of the dimension."""
    return make_automaton(
        dim, constants, ["u0"], ["u0"], ["u0"], [("u0", "true", "u0")]
    )


def check_run(aut: ConstraintAutomaton, run: Run) -> bool:
    """True iff every consecutive configuration pair is licensed by some
    transition whose guard holds on (current, next)."""
    for c in run:
        if len(c.values) != aut.dim or c.state not in aut.states:
            return False
    for cur, nxt in zip(run, run[1:]):
        ok = False
        for t in aut.transitions_from(cur.state):
            if t.target != nxt.state:
                continue
            if eval_guard(t.guard, cur.values, nxt.values, aut.constants):
                ok = True
                break
        if not ok:
            return False
    return True


def _merge_constants(a: ConstantSet, b: ConstantSet) -> ConstantSet:
    if set(a.closure) != set(b.closure):
        raise ConstantMismatch("automata declare different constant value sets")
    names = dict(a.entries)
    for name, value in b.entries:
        if name in names and names[name] != value:
            raise ConstantMismatch(f"constant {name!r} bound to two different words")
        names[name] = value
    return ConstantSet.from_entries(sorted(names.items()))


def product(a: ConstraintAutomaton, b: ConstraintAutomaton) -> ConstraintAutomaton:
    """Buechi product via the usual two-phase flag.

    Dimensions may differ; the smaller automaton reads a prefix of the
    variable tuple, so guards conjoin unchanged.
    """
    constants = _merge_constants(a.constants, b.constants)
    dim = max(a.dim, b.dim)
    fa = set(a.final)
    fb = set(b.final)

    def name(qa, qb, ph):
        return f"{qa}|{qb}|{ph}"

    states = [name(qa, qb, ph) for qa in a.states for qb in b.states for ph in (0, 1)]
    initial = [name(qa, qb, 0) for qa in a.initial for qb in b.initial]
    final = [name(qa, qb, 1) for qa in a.states for qb in b.states if qb in fb]
    transitions = []
    for ta in a.transitions:
        for tb in b.transitions:
            guard = guard_and([ta.guard, tb.guard])
            for ph in (0, 1):
                if ph == 0:
                    ph2 = 1 if ta.source in fa else 0
                else:
                    ph2 = 0 if tb.source in fb else 1
                transitions.append(
                    Transition(name(ta.source, tb.source, ph), guard, name(ta.target, tb.target, ph2))
                )
    return ConstraintAutomaton(
        dim, constants, tuple(states), tuple(initial), tuple(final), tuple(transitions)
    )


def one_step_types(aut: ConstraintAutomaton) -> set[RunType]:
    """Types of all runs of length exactly one."""
    ctx = TypeContext.get(aut.constants)
    out: set[RunType] = set()
    for t in aut.transitions:
        for tid in ctx.types_for_guard(t.guard, aut.dim):
            out.add(RunType(t.source, ctx.type_of(tid), t.target))
    return out


# -- JSON interchange --------------------------------------------------------


def automaton_to_json(aut: ConstraintAutomaton) -> dict:
    return {
        "dim": aut.dim,
        "constants": {name: word_to_text(value) for name, value in aut.constants.entries},
        "states": list(aut.states),
        "initial": list(aut.initial),
        "final": list(aut.final),
        "transitions": [
            {"from": t.source, "to": t.target, "guard": t.guard.to_text()}
            for t in aut.transitions
        ],
    }


def automaton_from_json(data: dict) -> ConstraintAutomaton:
    try:
        dim = int(data["dim"])
        entries = [(name, word_from_text(text)) for name, text in data.get("constants", {}).items()]
        states = [str(s) for s in data["states"]]
        initial = [str(s) for s in data["initial"]]
        final = [str(s) for s in data["final"]]
        transitions = [
            (str(t["from"]), str(t["guard"]), str(t["to"])) for t in data["transitions"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed automaton JSON: {exc}") from exc
    return make_automaton(dim, entries, states, initial, final, transitions)


def save_automaton(aut: ConstraintAutomaton, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(automaton_to_json(aut), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_automaton(path: str) -> ConstraintAutomaton:
    with open(path, encoding="utf-8") as fh:
        return automaton_from_json(json.load(fh))


def run_to_json(run: Run) -> list[dict]:
    return [
        {"state": c.state, "values": [word_to_text(v) for v in c.values]} for c in run
    ]


def run_from_json(data) -> Run:
    out: Run = []
    for item in data:
        out.append(
            Config(str(item["state"]), tuple(word_from_text(v) for v in item["values"]))
        )
    return out
