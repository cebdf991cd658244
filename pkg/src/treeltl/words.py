"""Exact primitives for the rational order tree.

A tree node is a finite word of rational branch labels.  Only the order of
labels matters, so labels are exact `Fraction`s and every predicate here is
decidable.  Words serialize as labels joined by "." with each label written
``p`` or ``p/q`` in lowest terms; the empty word prints as ``eps``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ParseError, PreconditionViolated

Word = tuple[Fraction, ...]

EPSILON: Word = ()
ZERO = Fraction(0)
ONE = Fraction(1)
TWO = Fraction(2)


def word(*labels) -> Word:
    """Build a word from ints, strings like "1/2", or Fractions."""
    return tuple(Fraction(x) for x in labels)


def prefix_leq(w: Word, v: Word) -> bool:
    """True iff w is a (non-strict) prefix of v."""
    return len(w) <= len(v) and v[: len(w)] == w


def strict_prefix(w: Word, v: Word) -> bool:
    return len(w) < len(v) and v[: len(w)] == w


def gcp(w: Word, v: Word) -> Word:
    """Greatest common prefix of two words."""
    n = min(len(w), len(v))
    i = 0
    while i < n and w[i] == v[i]:
        i += 1
    return w[:i]


def lex_leq(w: Word, v: Word) -> bool:
    """Total lexicographic order: prefixes come first, then label order."""
    n = min(len(w), len(v))
    i = 0
    while i < n and w[i] == v[i]:
        i += 1
    if i == len(w) or i == len(v):
        return len(w) <= len(v)
    return w[i] < v[i]


def incomparable_left(w: Word, v: Word) -> bool:
    """True iff w is lex-before v and prefix-incomparable to it."""
    return lex_leq(w, v) and not prefix_leq(w, v)


def insert_gap(u: Word, m: int, w: Word) -> Word:
    """Splice m zero labels right after u into every word below u.

    Words that do not extend u are returned unchanged.
    """
    if m < 0:
        raise PreconditionViolated("gap size must be non-negative")
    if not prefix_leq(u, w):
        return w
    return u + (ZERO,) * m + w[len(u):]


def word_to_text(w: Word) -> str:
    if not w:
        return "eps"
    parts = []
    for q in w:
        if q.denominator == 1:
            parts.append(str(q.numerator))
        else:
            parts.append(f"{q.numerator}/{q.denominator}")
    return ".".join(parts)


def word_from_text(text: str) -> Word:
    text = text.strip()
    if text == "eps" or text == "":
        return EPSILON
    labels = []
    for part in text.split("."):
        try:
            labels.append(Fraction(part))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad label {part!r} in word {text!r}") from exc
    return tuple(labels)


def stern_brocot_code(q: Fraction) -> Word:
    """Encode a positive rational as a word over {1,2} in {11,22}*12.

    Left steps in the mediant walk emit 1.1, right steps 2.2, and the code
    ends with the terminator 1.2.  The map is injective and strictly
    monotone: q < q' iff the code of q is lex-below the code of q'.
    """
    q = Fraction(q)
    if q <= 0:
        raise PreconditionViolated(f"encoding needs a positive rational, got {q}")
    lo_n, lo_d = 0, 1
    hi_n, hi_d = 1, 0
    out: list[Fraction] = []
    while True:
        med_n, med_d = lo_n + hi_n, lo_d + hi_d
        cmp = q.numerator * med_d - med_n * q.denominator
        if cmp == 0:
            break
        if cmp < 0:
            out.extend((ONE, ONE))
            hi_n, hi_d = med_n, med_d
        else:
            out.extend((TWO, TWO))
            lo_n, lo_d = med_n, med_d
    out.extend((ONE, TWO))
    return tuple(out)


def embed_word(w: Word) -> Word:
    """Concatenate the label codes; preserves prefix and lex order both ways.

    Labels must be positive.  For words with arbitrary labels, shift them
    jointly first (see embed_words).
    """
    out: list[Fraction] = []
    for q in w:
        out.extend(stern_brocot_code(q))
    return tuple(out)


def embed_words(words: list[Word]) -> list[Word]:
    """Embed several words jointly into the binary tree.

    A single strictly monotone shift (q -> q - min + 1) normalizes all labels
    to positive rationals so the embedding is order-consistent across words.
    """
    labels = [q for w in words for q in w]
    shift = ZERO
    if labels:
        low = min(labels)
        if low <= 0:
            shift = ONE - low
    return [embed_word(tuple(q + shift for q in w)) for w in words]


def _is_identifier(name: str) -> bool:
    return name.isidentifier()


@dataclass(frozen=True)
class ConstantSet:
    """Named constant words, closed under prefixes.

    `entries` holds what the user declared; `closure` additionally contains
    every prefix of every declared value (including the empty word when any
    constant is declared).  The closure is what the type algebra sees: it
    guarantees that any node above a constant is itself a constant, which
    keeps gap insertion and realization away from pinned regions.
    """

    entries: tuple[tuple[str, Word], ...]
    closure: tuple[Word, ...]

    @staticmethod
    def from_entries(pairs) -> "ConstantSet":
        entries = []
        seen_names = set()
        seen_values = set()
        for name, value in pairs:
            if not _is_identifier(name):
                raise ParseError(f"constant name {name!r} is not an identifier")
            if name in seen_names:
                raise ParseError(f"duplicate constant name {name!r}")
            if value in seen_values:
                raise ParseError(f"duplicate constant value {word_to_text(value)!r}")
            seen_names.add(name)
            seen_values.add(value)
            entries.append((name, tuple(value)))
        closed = set(seen_values)
        for value in seen_values:
            for i in range(len(value)):
                closed.add(value[:i])
        closure = tuple(sorted(closed, key=lambda w: (len(w), w)))
        return ConstantSet(tuple(entries), closure)

    def value_of(self, name: str):
        for n, v in self.entries:
            if n == name:
                return v
        return None

    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries)

    def __len__(self):
        return len(self.entries)


EMPTY_CONSTANTS = ConstantSet.from_entries([])


def is_constant_prefix(u: Word, constants: ConstantSet) -> bool:
    """True iff u is a prefix of some constant (equivalently, in the closure)."""
    return any(prefix_leq(u, c) for c in constants.closure)
