"""Quantifier-free transition guards over current/next values and constants.

Grammar (concrete syntax): atoms ``eq(t,u)``, ``pref(t,u)``, ``lex(t,u)``
with terms ``x<i>``, ``y<i>``, or a declared constant name, combined with
``&``, ``|``, ``!`` and parentheses.  Negation is pushed onto atoms at parse
time, so the stored form is positive boolean structure over signed atoms.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ArityMismatch, ParseError, UndeclaredSymbol
from .words import ConstantSet, Word, lex_leq, prefix_leq

# Terms are ("x", i) / ("y", i) with 1-based i, or ("c", name).
Term = tuple[str, object]

RELS = ("eq", "pref", "lex")


@dataclass(frozen=True)
class Atom:
    rel: str
    left: Term
    right: Term
    negated: bool = False

    def to_text(self) -> str:
        body = f"{self.rel}({_term_text(self.left)},{_term_text(self.right)})"
        return f"!{body}" if self.negated else body


@dataclass(frozen=True)
class And:
    parts: tuple

    def to_text(self) -> str:
        if not self.parts:
            return "eq(x1,x1)"
        return " & ".join(_paren(p, And) for p in self.parts)


@dataclass(frozen=True)
class Or:
    parts: tuple

    def to_text(self) -> str:
        if not self.parts:
            return "!eq(x1,x1)"
        return " | ".join(f"({p.to_text()})" if isinstance(p, Or) else _paren(p, Or) for p in self.parts)


def _paren(g, _outer) -> str:
    if isinstance(g, Or):
        return f"({g.to_text()})"
    return g.to_text()


Guard = object  # Atom | And | Or

TRUE = And(())
FALSE = Or(())


def _term_text(t: Term) -> str:
    kind, payload = t
    if kind == "c":
        return str(payload)
    return f"{kind}{payload}"


def guard_and(parts) -> Guard:
    flat = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def guard_or(parts) -> Guard:
    flat = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def negate(g: Guard) -> Guard:
    if isinstance(g, Atom):
        return Atom(g.rel, g.left, g.right, not g.negated)
    if isinstance(g, And):
        return Or(tuple(negate(p) for p in g.parts))
    return And(tuple(negate(p) for p in g.parts))


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str):
        self.skip_ws()
        if self.peek() != ch:
            raise ParseError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        if self.pos == start:
            raise ParseError("expected identifier", self.pos)
        return self.text[start : self.pos]


def parse_guard(text: str, dim: int, constants: ConstantSet) -> Guard:
    """Parse a guard, checking variable indices against `dim` and constant
    names against the declared set."""
    sc = _Scanner(text)
    g = _parse_or(sc, dim, constants)
    sc.skip_ws()
    if sc.pos != len(text):
        raise ParseError("trailing input after guard", sc.pos)
    return g


def _parse_or(sc: _Scanner, dim, constants) -> Guard:
    parts = [_parse_and(sc, dim, constants)]
    while sc.peek() == "|":
        sc.take("|")
        parts.append(_parse_and(sc, dim, constants))
    return guard_or(parts) if len(parts) > 1 else parts[0]


def _parse_and(sc: _Scanner, dim, constants) -> Guard:
    parts = [_parse_unary(sc, dim, constants)]
    while sc.peek() == "&":
        sc.take("&")
        parts.append(_parse_unary(sc, dim, constants))
    return guard_and(parts) if len(parts) > 1 else parts[0]


def _parse_unary(sc: _Scanner, dim, constants) -> Guard:
    ch = sc.peek()
    if ch == "!":
        sc.take("!")
        return negate(_parse_unary(sc, dim, constants))
    if ch == "(":
        sc.take("(")
        g = _parse_or(sc, dim, constants)
        sc.take(")")
        return g
    name = sc.ident()
    if name == "true":
        return TRUE
    if name == "false":
        return FALSE
    if name not in RELS:
        raise ParseError(f"unknown relation {name!r}", sc.pos)
    sc.take("(")
    left = _parse_term(sc, dim, constants)
    sc.take(",")
    right = _parse_term(sc, dim, constants)
    sc.take(")")
    return Atom(name, left, right)


def _parse_term(sc: _Scanner, dim, constants) -> Term:
    name = sc.ident()
    if name[0] in "xy" and name[1:].isdigit():
        idx = int(name[1:])
        if not 1 <= idx <= dim:
            raise UndeclaredSymbol(f"variable {name} exceeds dimension {dim}")
        return (name[0], idx)
    if constants.value_of(name) is None:
        raise UndeclaredSymbol(f"constant {name!r} is not declared")
    return ("c", name)


def _rel_holds(rel: str, a: Word, b: Word) -> bool:
    if rel == "eq":
        return a == b
    if rel == "pref":
        return prefix_leq(a, b)
    return lex_leq(a, b)


def eval_guard(
    guard: Guard,
    wt: tuple[Word, ...],
    vt: tuple[Word, ...],
    constants: ConstantSet,
) -> bool:
    """Truth of the guard with x bound to wt and y bound to vt."""

    def term_value(t: Term) -> Word:
        kind, payload = t
        if kind == "x":
            if payload > len(wt):
                raise ArityMismatch(f"x{payload} exceeds tuple arity {len(wt)}")
            return wt[payload - 1]
        if kind == "y":
            if payload > len(vt):
                raise ArityMismatch(f"y{payload} exceeds tuple arity {len(vt)}")
            return vt[payload - 1]
        value = constants.value_of(payload)
        if value is None:
            raise UndeclaredSymbol(f"constant {payload!r} is not declared")
        return value

    def ev(g) -> bool:
        if isinstance(g, Atom):
            res = _rel_holds(g.rel, term_value(g.left), term_value(g.right))
            return res != g.negated
        if isinstance(g, And):
            return all(ev(p) for p in g.parts)
        return any(ev(p) for p in g.parts)

    return ev(guard)


def eval_guard_on_tree(guard: Guard, tree, xnodes, ynodes, const_nodes) -> bool:
    """Guard truth on a marked tree; relations are read off the structure.

    `xnodes`/`ynodes` list the node id per position; `const_nodes` maps
    constant names to node ids.
    """

    def term_node(t: Term) -> int:
        kind, payload = t
        if kind == "x":
            return xnodes[payload - 1]
        if kind == "y":
            return ynodes[payload - 1]
        return const_nodes[payload]

    def ev(g) -> bool:
        if isinstance(g, Atom):
            a = term_node(g.left)
            b = term_node(g.right)
            if g.rel == "eq":
                res = a == b
            elif g.rel == "pref":
                res = tree.is_ancestor(a, b)
            else:
                res = tree.lex_node_leq(a, b)
            return res != g.negated
        if isinstance(g, And):
            return all(ev(p) for p in g.parts)
        return any(ev(p) for p in g.parts)

    return ev(guard)


def guard_atoms(guard: Guard) -> list[Atom]:
    if isinstance(guard, Atom):
        return [guard]
    out = []
    for p in guard.parts:
        out.extend(guard_atoms(p))
    return out
