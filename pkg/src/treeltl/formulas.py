"""Constraint-LTL formulas: syntax, normal forms, and lasso evaluation.

Atoms compare tree values at shifted positions: ``pref(X^2 x1, c1)`` holds at
position t when the first component at t+2 is a prefix of the constant.
Formula files start with ``const <name> = <word>;`` headers followed by one
formula.  Operators: ``! & | X U R G F``; ``U``/``R`` are right-associative
and bind tighter than ``&``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import ArityMismatch, ParseError, UndeclaredSymbol
from .words import ConstantSet, Word, lex_leq, prefix_leq, word_from_text

# Atom terms: ("var", index, shift) or ("const", name).
FTerm = tuple


@dataclass(frozen=True)
class FAtom:
    rel: str
    left: FTerm
    right: FTerm

    def to_text(self):
        return f"{self.rel}({_fterm_text(self.left)},{_fterm_text(self.right)})"


@dataclass(frozen=True)
class FTrue:
    def to_text(self):
        return "true"


@dataclass(frozen=True)
class FFalse:
    def to_text(self):
        return "false"


@dataclass(frozen=True)
class FNot:
    sub: object

    def to_text(self):
        return f"!{_paren(self.sub)}"


@dataclass(frozen=True)
class FAnd:
    left: object
    right: object

    def to_text(self):
        return f"({self.left.to_text()} & {self.right.to_text()})"


@dataclass(frozen=True)
class FOr:
    left: object
    right: object

    def to_text(self):
        return f"({self.left.to_text()} | {self.right.to_text()})"


@dataclass(frozen=True)
class FNext:
    sub: object

    def to_text(self):
        return f"X {_paren(self.sub)}"


@dataclass(frozen=True)
class FGlobally:
    sub: object

    def to_text(self):
        return f"G {_paren(self.sub)}"


@dataclass(frozen=True)
class FFinally:
    sub: object

    def to_text(self):
        return f"F {_paren(self.sub)}"


@dataclass(frozen=True)
class FUntil:
    left: object
    right: object

    def to_text(self):
        return f"({self.left.to_text()} U {self.right.to_text()})"


@dataclass(frozen=True)
class FRelease:
    left: object
    right: object

    def to_text(self):
        return f"({self.left.to_text()} R {self.right.to_text()})"


Formula = object


def _paren(f) -> str:
    text = f.to_text()
    if isinstance(f, (FAtom, FTrue, FFalse, FNot)) or text.startswith("("):
        return text
    return f"({text})"


def _fterm_text(t: FTerm) -> str:
    if t[0] == "const":
        return t[1]
    _, idx, shift = t
    if shift == 0:
        return f"x{idx}"
    if shift == 1:
        return f"X x{idx}"
    return f"X^{shift} x{idx}"


def formula_variables(f: Formula) -> set[int]:
    out: set[int] = set()

    def walk(node):
        if isinstance(node, FAtom):
            for t in (node.left, node.right):
                if t[0] == "var":
                    out.add(t[1])
        elif isinstance(node, (FTrue, FFalse)):
            pass
        elif isinstance(node, (FNot, FNext, FGlobally, FFinally)):
            walk(node.sub)
        else:
            walk(node.left)
            walk(node.right)

    walk(f)
    return out


def max_term_shift(f: Formula) -> int:
    best = 0

    def walk(node):
        nonlocal best
        if isinstance(node, FAtom):
            for t in (node.left, node.right):
                if t[0] == "var":
                    best = max(best, t[2])
        elif isinstance(node, (FTrue, FFalse)):
            pass
        elif isinstance(node, (FNot, FNext, FGlobally, FFinally)):
            walk(node.sub)
        else:
            walk(node.left)
            walk(node.right)

    walk(f)
    return best


# -- parsing ------------------------------------------------------------------

_TERM_VAR = re.compile(r"(X(\^(\d+))?\s*)?x(\d+)")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_CONST_HEADER = re.compile(r"const\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^;]+);")


class _FScanner:
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
        if self.peek() != ch:
            raise ParseError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def match_ident(self) -> str | None:
        self.skip_ws()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            return None
        return m.group(0)

    def take_ident(self) -> str:
        name = self.match_ident()
        if name is None:
            raise ParseError("expected identifier", self.pos)
        self.pos += len(name)
        return name


def parse_formula(text: str, constants: ConstantSet) -> Formula:
    """Parse one formula; raises ParseError with an offset on bad input."""
    sc = _FScanner(text)
    f = _parse_or_f(sc, constants)
    sc.skip_ws()
    if sc.pos != len(text):
        raise ParseError("trailing input after formula", sc.pos)
    return f


def parse_formula_file(text: str):
    """Parse ``const`` headers followed by one formula.

    Returns (constants, formula)."""
    entries = []
    pos = 0
    while True:
        ws = re.match(r"\s*", text[pos:])
        offset = pos + ws.end()
        m = _CONST_HEADER.match(text, offset)
        if not m:
            pos = offset
            break
        entries.append((m.group(1), word_from_text(m.group(2).strip())))
        pos = m.end()
    constants = ConstantSet.from_entries(entries)
    formula = parse_formula(text[pos:].strip(), constants)
    return constants, formula


def _parse_or_f(sc, constants) -> Formula:
    f = _parse_and_f(sc, constants)
    while sc.peek() == "|":
        sc.take("|")
        f = FOr(f, _parse_and_f(sc, constants))
    return f


def _parse_and_f(sc, constants) -> Formula:
    f = _parse_until_f(sc, constants)
    while sc.peek() == "&":
        sc.take("&")
        f = FAnd(f, _parse_until_f(sc, constants))
    return f


def _parse_until_f(sc, constants) -> Formula:
    f = _parse_unary_f(sc, constants)
    name = sc.match_ident()
    if name in ("U", "R"):
        sc.pos += 1
        rhs = _parse_until_f(sc, constants)
        return FUntil(f, rhs) if name == "U" else FRelease(f, rhs)
    return f


def _parse_unary_f(sc, constants) -> Formula:
    ch = sc.peek()
    if ch == "!":
        sc.take("!")
        return FNot(_parse_unary_f(sc, constants))
    if ch == "(":
        sc.take("(")
        f = _parse_or_f(sc, constants)
        sc.take(")")
        return f
    name = sc.match_ident()
    if name is None:
        raise ParseError("expected formula", sc.pos)
    if name == "X":
        sc.pos += 1
        return FNext(_parse_unary_f(sc, constants))
    if name == "G":
        sc.pos += 1
        return FGlobally(_parse_unary_f(sc, constants))
    if name == "F":
        sc.pos += 1
        return FFinally(_parse_unary_f(sc, constants))
    if name == "true":
        sc.pos += 4
        return FTrue()
    if name == "false":
        sc.pos += 5
        return FFalse()
    if name in ("eq", "pref", "lex"):
        sc.pos += len(name)
        sc.take("(")
        left = _parse_fterm(sc, constants)
        sc.take(",")
        right = _parse_fterm(sc, constants)
        sc.take(")")
        return FAtom(name, left, right)
    raise ParseError(f"unexpected token {name!r}", sc.pos)


def _parse_fterm(sc, constants) -> FTerm:
    sc.skip_ws()
    m = _TERM_VAR.match(sc.text, sc.pos)
    if m:
        sc.pos = m.end()
        shift = 0
        if m.group(1):
            shift = int(m.group(3)) if m.group(3) else 1
        idx = int(m.group(4))
        if idx < 1:
            raise ParseError("variable indices start at 1", sc.pos)
        return ("var", idx, shift)
    name = sc.take_ident()
    if constants.value_of(name) is None:
        raise UndeclaredSymbol(f"constant {name!r} is not declared")
    return ("const", name)


# -- negation normal form -----------------------------------------------------


def to_nnf(f: Formula) -> Formula:
    """Push negations onto atoms, using the U/R and G/F dualities."""
    if isinstance(f, FNot):
        g = f.sub
        if isinstance(g, FAtom):
            return f
        if isinstance(g, FTrue):
            return FFalse()
        if isinstance(g, FFalse):
            return FTrue()
        if isinstance(g, FNot):
            return to_nnf(g.sub)
        if isinstance(g, FAnd):
            return FOr(to_nnf(FNot(g.left)), to_nnf(FNot(g.right)))
        if isinstance(g, FOr):
            return FAnd(to_nnf(FNot(g.left)), to_nnf(FNot(g.right)))
        if isinstance(g, FNext):
            return FNext(to_nnf(FNot(g.sub)))
        if isinstance(g, FGlobally):
            return FFinally(to_nnf(FNot(g.sub)))
        if isinstance(g, FFinally):
            return FGlobally(to_nnf(FNot(g.sub)))
        if isinstance(g, FUntil):
            return FRelease(to_nnf(FNot(g.left)), to_nnf(FNot(g.right)))
        if isinstance(g, FRelease):
            return FUntil(to_nnf(FNot(g.left)), to_nnf(FNot(g.right)))
        raise TypeError(f"unknown node {g!r}")
    if isinstance(f, (FAtom, FTrue, FFalse)):
        return f
    if isinstance(f, FNext):
        return FNext(to_nnf(f.sub))
    if isinstance(f, FGlobally):
        return FGlobally(to_nnf(f.sub))
    if isinstance(f, FFinally):
        return FFinally(to_nnf(f.sub))
    if isinstance(f, FAnd):
        return FAnd(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, FOr):
        return FOr(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, FUntil):
        return FUntil(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, FRelease):
        return FRelease(to_nnf(f.left), to_nnf(f.right))
    raise TypeError(f"unknown node {f!r}")


# -- exponent elimination -----------------------------------------------------


def eliminate_exponents(f: Formula, dim: int | None = None):
    """Rewrite atoms so no term carries a shift above 1.

    Variable-variable atoms first shift out the common part as formula-level
    X; the residual deep side is then tracked by a fresh variable chain
    u_j = X u_{j-1} pinned to the shallow clock, and the atom reads the last
    chain variable.  Variable-constant atoms only need the formula-level
    shift (constants are rigid).  Returns (formula, new_dimension); models of
    the output restricted to the original variables model the input.
    """
    if dim is None:
        dim = max(formula_variables(f), default=1)
    next_var = [max(dim, max(formula_variables(f), default=0)) ]
    chains: list[Formula] = []

    def fresh_chain(base_idx: int, depth: int) -> int:
        # u_0 = base, u_j = X u_{j-1}; returns the index of u_depth
        u_prev = None
        first = None
        for j in range(depth + 1):
            next_var[0] += 1
            u = next_var[0]
            if j == 0:
                first = u
                chains.append(FAtom("eq", ("var", u, 0), ("var", base_idx, 0)))
            else:
                chains.append(FAtom("eq", ("var", u, 0), ("var", u_prev, 1)))
            u_prev = u
        return u_prev

    def rewrite_atom(a: FAtom) -> Formula:
        lt, rt = a.left, a.right
        ls = lt[2] if lt[0] == "var" else None
        rs = rt[2] if rt[0] == "var" else None
        if ls is None and rs is None:
            return a
        if ls is None or rs is None:
            # one side is a rigid constant: shift the whole atom out
            if ls is None:
                shift = rs
                inner = FAtom(a.rel, lt, ("var", rt[1], 0))
            else:
                shift = ls
                inner = FAtom(a.rel, ("var", lt[1], 0), rt)
            out: Formula = inner
            for _ in range(shift):
                out = FNext(out)
            return out
        m = min(ls, rs)
        d_left, d_right = ls - m, rs - m
        left_term: FTerm = ("var", lt[1], d_left)
        right_term: FTerm = ("var", rt[1], d_right)
        if d_left > 1:
            u = fresh_chain(lt[1], d_left)
            left_term = ("var", u, 0)
        if d_right > 1:
            u = fresh_chain(rt[1], d_right)
            right_term = ("var", u, 0)
        out = FAtom(a.rel, left_term, right_term)
        for _ in range(m):
            out = FNext(out)
        return out

    def walk(node) -> Formula:
        if isinstance(node, FAtom):
            return rewrite_atom(node)
        if isinstance(node, (FTrue, FFalse)):
            return node
        if isinstance(node, FNot):
            return FNot(walk(node.sub))
        if isinstance(node, FNext):
            return FNext(walk(node.sub))
        if isinstance(node, FGlobally):
            return FGlobally(walk(node.sub))
        if isinstance(node, FFinally):
            return FFinally(walk(node.sub))
        if isinstance(node, FAnd):
            return FAnd(walk(node.left), walk(node.right))
        if isinstance(node, FOr):
            return FOr(walk(node.left), walk(node.right))
        if isinstance(node, FUntil):
            return FUntil(walk(node.left), walk(node.right))
        if isinstance(node, FRelease):
            return FRelease(walk(node.left), walk(node.right))
        raise TypeError(f"unknown node {node!r}")

    out = walk(f)
    if chains:
        conj = chains[0]
        for c in chains[1:]:
            conj = FAnd(conj, c)
        out = FAnd(out, FGlobally(conj))
    return out, next_var[0]


# -- lasso words and evaluation -----------------------------------------------


@dataclass(frozen=True)
class LassoWord:
    """Ultimately periodic data word: prefix then loop, repeated forever."""

    prefix: tuple[tuple[Word, ...], ...]
    loop: tuple[tuple[Word, ...], ...]

    def __post_init__(self):
        if not self.loop:
            raise ArityMismatch("lasso loop must be nonempty")
        arities = {len(t) for t in self.prefix + self.loop}
        if len(arities) != 1:
            raise ArityMismatch("lasso tuples have mixed arities")

    @property
    def arity(self) -> int:
        return len(self.loop[0])

    def position(self, t: int) -> tuple[Word, ...]:
        p, l = len(self.prefix), len(self.loop)
        if t < p:
            return self.prefix[t]
        return self.loop[(t - p) % l]


def eval_formula(f: Formula, w: LassoWord, constants: ConstantSet) -> bool:
    """Truth of the formula at position 0 of the infinite periodic word."""
    p, l = len(w.prefix), len(w.loop)
    n_pos = p + l
    succ = [t + 1 if t + 1 < n_pos else p for t in range(n_pos)]
    memo: dict = {}

    def term_value(t: FTerm, pos: int) -> Word:
        if t[0] == "const":
            value = constants.value_of(t[1])
            if value is None:
                raise UndeclaredSymbol(f"constant {t[1]!r} is not declared")
            return value
        _, idx, shift = t
        if idx > w.arity:
            raise ArityMismatch(f"variable x{idx} exceeds word arity {w.arity}")
        target = pos + shift
        if target >= n_pos:
            target = p + (target - p) % l if l else target
        return w.position(target)[idx - 1]

    def vec(node) -> list[bool]:
        got = memo.get(node)
        if got is not None:
            return got
        if isinstance(node, FTrue):
            v = [True] * n_pos
        elif isinstance(node, FFalse):
            v = [False] * n_pos
        elif isinstance(node, FAtom):
            v = []
            for t in range(n_pos):
                a = term_value(node.left, t)
                b = term_value(node.right, t)
                if node.rel == "eq":
                    v.append(a == b)
                elif node.rel == "pref":
                    v.append(prefix_leq(a, b))
                else:
                    v.append(lex_leq(a, b))
        elif isinstance(node, FNot):
            v = [not x for x in vec(node.sub)]
        elif isinstance(node, FAnd):
            va, vb = vec(node.left), vec(node.right)
            v = [a and b for a, b in zip(va, vb)]
        elif isinstance(node, FOr):
            va, vb = vec(node.left), vec(node.right)
            v = [a or b for a, b in zip(va, vb)]
        elif isinstance(node, FNext):
            vs = vec(node.sub)
            v = [vs[succ[t]] for t in range(n_pos)]
        elif isinstance(node, (FUntil, FFinally)):
            if isinstance(node, FUntil):
                vl, vr = vec(node.left), vec(node.right)
            else:
                vl, vr = [True] * n_pos, vec(node.sub)
            v = [False] * n_pos
            for _ in range(n_pos + 1):
                changed = False
                for t in range(n_pos - 1, -1, -1):
                    nv = vr[t] or (vl[t] and v[succ[t]])
                    if nv != v[t]:
                        v[t] = nv
                        changed = True
                if not changed:
                    break
        elif isinstance(node, (FRelease, FGlobally)):
            if isinstance(node, FRelease):
                vl, vr = vec(node.left), vec(node.right)
            else:
                vl, vr = [False] * n_pos, vec(node.sub)
            v = [True] * n_pos
            for _ in range(n_pos + 1):
                changed = False
                for t in range(n_pos - 1, -1, -1):
                    nv = vr[t] and (vl[t] or v[succ[t]])
                    if nv != v[t]:
                        v[t] = nv
                        changed = True
                if not changed:
                    break
        else:
            raise TypeError(f"unknown node {node!r}")
        memo[node] = v
        return v

    return vec(f)[0]
