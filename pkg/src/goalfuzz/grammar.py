"""Probabilistic context-free grammars.

A grammar is an ordered tuple of rules; a rule's position is its identity
(rule index), and the order of its alternatives fixes the column layout of the
probability matrix ("gene") that the search loop mutates.

Symbols inside an alternative are either ``bytes`` (a terminal literal, possibly
empty) or ``int`` (a reference to another rule by index).

Grammar text format::

    # comment
    start   = "euclid(" integer "," integer ")"
    integer = @0.04 digit | @0.96 nzdigit number
    nzdigit = "1" | "2" | "3"
            | "4" | "5"

Continuation lines start with ``|`` or whitespace.  Terminals are double quoted
and support the escapes ``\\" \\\\ \\n \\t \\r \\xHH``.  ``@<float>`` in front of an
alternative annotates its probability; unannotated alternatives share the
remaining mass equally.  The first rule is the start rule.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, replace
from typing import Sequence, Union

Symbol = Union[bytes, int]

PROBABILITY_TOLERANCE = 1e-9
SAVE_DECIMALS = 9


class GrammarError(ValueError):
    """Raised for malformed grammars and invalid probability layouts."""


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Alternative:
    symbols: tuple[Symbol, ...]
    probability: float

    @property
    def nonterminals(self) -> tuple[int, ...]:
        return tuple(s for s in self.symbols if isinstance(s, int))


@dataclass(frozen=True)
class Rule:
    name: str
    alternatives: tuple[Alternative, ...]

    @property
    def probabilities(self) -> list[float]:
        return [a.probability for a in self.alternatives]


@dataclass(frozen=True)
class ProbabilisticGrammar:
    """Immutable PCFG.  All operations in this module return new grammars.

    Construction checks structure (names, references, nonnegative weights).
    Weights need not sum to one until :func:`normalize` has been applied;
    :func:`check_normalized` verifies the probability invariant.
    """

    rules: tuple[Rule, ...]
    start: int = 0

    def __post_init__(self):
        if not self.rules:
            raise GrammarError("grammar has no rules")
        if not 0 <= self.start < len(self.rules):
            raise GrammarError(f"start rule index {self.start} out of range")
        seen = set()
        for rule in self.rules:
            if not rule.name or any(c.isspace() for c in rule.name):
                raise GrammarError(f"invalid rule name {rule.name!r}")
            if rule.name in seen:
                raise GrammarError(f"duplicate rule {rule.name!r}")
            seen.add(rule.name)
            if not rule.alternatives:
                raise GrammarError(f"rule {rule.name!r} has no alternatives")
            for alt in rule.alternatives:
                p = alt.probability
                if not (math.isfinite(p) and p >= 0):
                    raise GrammarError(f"rule {rule.name!r}: bad weight {p!r}")
                for sym in alt.symbols:
                    if isinstance(sym, bool) or not isinstance(sym, (bytes, int)):
                        raise GrammarError(f"rule {rule.name!r}: bad symbol {sym!r}")
                    if isinstance(sym, int) and not 0 <= sym < len(self.rules):
                        raise GrammarError(
                            f"rule {rule.name!r} references undefined rule index {sym}")

    def __len__(self) -> int:
        return len(self.rules)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.rules]

    def index(self, name: str) -> int:
        for i, rule in enumerate(self.rules):
            if rule.name == name:
                return i
        raise KeyError(name)

    def rule(self, name_or_index: str | int) -> Rule:
        if isinstance(name_or_index, str):
            return self.rules[self.index(name_or_index)]
        return self.rules[name_or_index]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(r.alternatives) for r in self.rules)

    def with_probabilities(self, rows: Sequence[Sequence[float]]) -> ProbabilisticGrammar:
        """Same structure, new per-alternative weights (no normalization)."""
        if len(rows) != len(self.rules):
            raise GrammarError(f"expected {len(self.rules)} rows, got {len(rows)}")
        rules = []
        for rule, row in zip(self.rules, rows):
            if len(row) != len(rule.alternatives):
                raise GrammarError(
                    f"rule {rule.name!r}: expected {len(rule.alternatives)} "
                    f"entries, got {len(row)}")
            alts = tuple(replace(a, probability=float(p))
                         for a, p in zip(rule.alternatives, row))
            rules.append(replace(rule, alternatives=alts))
        return ProbabilisticGrammar(tuple(rules), self.start)


def check_normalized(g: ProbabilisticGrammar, tol: float = PROBABILITY_TOLERANCE) -> None:
    for rule in g.rules:
        probs = rule.probabilities
        if any(p > 1 + tol for p in probs):
            raise GrammarError(f"rule {rule.name!r}: probability above 1")
        if abs(math.fsum(probs) - 1.0) > tol:
            raise GrammarError(
                f"rule {rule.name!r}: probabilities sum to {math.fsum(probs)!r}")


def _normalized_row(name: str, row: Sequence[float]) -> list[float]:
    total = math.fsum(row)
    if total <= 0:
        raise GrammarError(f"rule {name!r}: all weights are zero, cannot normalize")
    return [p / total for p in row]


def normalize(g: ProbabilisticGrammar) -> ProbabilisticGrammar:
    """Scale every rule's weights to sum to one."""
    return g.with_probabilities(
        [_normalized_row(r.name, r.probabilities) for r in g.rules])


def invert_probabilities(g: ProbabilisticGrammar) -> ProbabilisticGrammar:
    """Complement each rule's distribution: p' = (1 - p) / (J - 1).

    Rules with a single alternative are left alone.  For J == 2 this swaps
    the two probabilities, so the operation is an involution there.
    """
    rows = []
    for rule in g.rules:
        probs = rule.probabilities
        k = len(probs)
        rows.append(probs if k == 1 else [(1.0 - p) / (k - 1) for p in probs])
    return g.with_probabilities(rows)


def uniform(g: ProbabilisticGrammar) -> ProbabilisticGrammar:
    return g.with_probabilities([[1.0 / len(r.alternatives)] * len(r.alternatives)
                                 for r in g.rules])


def uniformize_rule(g: ProbabilisticGrammar, rule_index: int) -> ProbabilisticGrammar:
    if not 0 <= rule_index < len(g.rules):
        raise IndexError(f"rule index {rule_index} out of range [0, {len(g.rules)})")
    rows = [r.probabilities for r in g.rules]
    k = len(rows[rule_index])
    rows[rule_index] = [1.0 / k] * k
    return g.with_probabilities(rows)


def mutate_grammar(g: ProbabilisticGrammar, rng: random.Random) -> ProbabilisticGrammar:
    """Uniformize one rule chosen uniformly at random (one ``randrange`` draw)."""
    return uniformize_rule(g, rng.randrange(len(g.rules)))


def to_gene(g: ProbabilisticGrammar) -> list[list[float]]:
    return [r.probabilities for r in g.rules]


def from_gene(g: ProbabilisticGrammar, matrix: Sequence[Sequence[float]]) -> ProbabilisticGrammar:
    if len(matrix) != len(g.rules):
        raise GrammarError(f"gene has {len(matrix)} rows, grammar has {len(g.rules)} rules")
    for rule, row in zip(g.rules, matrix):
        if len(row) != len(rule.alternatives):
            raise GrammarError(f"gene row for {rule.name!r} has wrong length {len(row)}")
        if any(p < 0 or p > 1 + PROBABILITY_TOLERANCE for p in row):
            raise GrammarError(f"gene row for {rule.name!r} leaves [0, 1]")
        if abs(math.fsum(row) - 1.0) > PROBABILITY_TOLERANCE:
            raise GrammarError(f"gene row for {rule.name!r} is not normalized")
    return g.with_probabilities(matrix)


# --- text format -----------------------------------------------------------

_NAME = re.compile(rb"[^\s\"|=@#]+")
_FLOAT = re.compile(rb"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_SIMPLE_ESCAPES = {ord('"'): b'"', ord("\\"): b"\\", ord("n"): b"\n",
                   ord("t"): b"\t", ord("r"): b"\r"}


def _logical_lines(text: bytes):
    """Yield (first_line_number, joined_content) with comments stripped."""
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw, lineno)
        if not line.strip():
            continue
        if line[:1].isspace() or line.lstrip().startswith(b"|"):
            if current is None:
                raise GrammarSyntaxError("continuation line without a rule", lineno)
            current[1].append((lineno, line))
        else:
            if current is not None:
                yield current
            current = (lineno, [(lineno, line)])
    if current is not None:
        yield current


def _strip_comment(line: bytes, lineno: int) -> bytes:
    in_string = False
    i = 0
    while i < len(line):
        c = line[i:i + 1]
        if in_string:
            if c == b"\\":
                i += 1
            elif c == b'"':
                in_string = False
        elif c == b'"':
            in_string = True
        elif c == b"#":
            return line[:i]
        i += 1
    if in_string:
        raise GrammarSyntaxError("unterminated string", lineno)
    return line


def _tokenize(pieces):
    """Tokens are (kind, value, lineno); kinds: name, term, prob, eq, bar."""
    for lineno, line in pieces:
        i = 0
        n = len(line)
        while i < n:
            c = line[i:i + 1]
            if c.isspace():
                i += 1
            elif c == b"=":
                yield ("eq", None, lineno)
                i += 1
            elif c == b"|":
                yield ("bar", None, lineno)
                i += 1
            elif c == b"@":
                m = _FLOAT.match(line, i + 1)
                if not m:
                    raise GrammarSyntaxError("expected a number after '@'", lineno)
                yield ("prob", float(m.group()), lineno)
                i = m.end()
            elif c == b'"':
                value, i = _read_terminal(line, i + 1, lineno)
                yield ("term", value, lineno)
            else:
                m = _NAME.match(line, i)
                if not m:
                    raise GrammarSyntaxError(f"unexpected character {c!r}", lineno)
                yield ("name", m.group().decode("utf-8"), lineno)
                i = m.end()


def _read_terminal(line: bytes, i: int, lineno: int) -> tuple[bytes, int]:
    out = bytearray()
    while i < len(line):
        b = line[i]
        if b == ord('"'):
            return bytes(out), i + 1
        if b == ord("\\"):
            if i + 1 >= len(line):
                break
            e = line[i + 1]
            if e in _SIMPLE_ESCAPES:
                out += _SIMPLE_ESCAPES[e]
                i += 2
            elif e == ord("x"):
                digits = line[i + 2:i + 4]
                if not re.fullmatch(rb"[0-9a-fA-F]{2}", digits):
                    raise GrammarSyntaxError("bad \\x escape", lineno)
                out.append(int(digits, 16))
                i += 4
            else:
                raise GrammarSyntaxError(f"unknown escape \\{chr(e)}", lineno)
        else:
            out.append(b)
            i += 1
    raise GrammarSyntaxError("unterminated string", lineno)


def load_grammar(text: bytes | str) -> ProbabilisticGrammar:
    if isinstance(text, str):
        text = text.encode("utf-8")
    parsed = []  # (name, lineno, [(prob|None, [symbol tokens])])
    for lineno, pieces in _logical_lines(text):
        tokens = list(_tokenize(pieces))
        if len(tokens) < 2 or tokens[0][0] != "name" or tokens[1][0] != "eq":
            raise GrammarSyntaxError("expected 'name = alternatives'", lineno)
        alts = [[None, []]]
        for kind, value, tok_line in tokens[2:]:
            if kind == "bar":
                alts.append([None, []])
            elif kind == "prob":
                if alts[-1][0] is not None or alts[-1][1]:
                    raise GrammarSyntaxError(
                        "probability annotation must prefix an alternative", tok_line)
                alts[-1][0] = value
            elif kind in ("name", "term"):
                alts[-1][1].append((kind, value, tok_line))
            else:
                raise GrammarSyntaxError("unexpected '='", tok_line)
        for prob, symbols in alts:
            if not symbols:
                raise GrammarSyntaxError(
                    'empty alternative (write "" for the empty string)', lineno)
        parsed.append((tokens[0][1], lineno, alts))

    index = {}
    for i, (name, lineno, _) in enumerate(parsed):
        if name in index:
            raise GrammarSyntaxError(f"duplicate rule {name!r}", lineno)
        index[name] = i

    rules = []
    for name, lineno, alts in parsed:
        probs = _assign_probabilities(name, lineno, [p for p, _ in alts])
        alternatives = []
        for p, (_, symbols) in zip(probs, alts):
            resolved = []
            for kind, value, tok_line in symbols:
                if kind == "term":
                    if value:
                        resolved.append(value)
                elif value in index:
                    resolved.append(index[value])
                else:
                    raise GrammarSyntaxError(f"undefined nonterminal {value!r}", tok_line)
            alternatives.append(Alternative(tuple(resolved), p))
        rules.append(Rule(name, tuple(alternatives)))
    return ProbabilisticGrammar(tuple(rules), 0)


def _assign_probabilities(name: str, lineno: int, annotated: list) -> list[float]:
    given = [p for p in annotated if p is not None]
    if any(p < 0 for p in given):
        raise GrammarSyntaxError(f"rule {name!r}: negative probability", lineno)
    mass = math.fsum(given)
    if mass > 1 + PROBABILITY_TOLERANCE:
        raise GrammarSyntaxError(
            f"rule {name!r}: annotated probabilities sum to {mass} > 1", lineno)
    free = annotated.count(None)
    if free:
        share = max(0.0, 1.0 - mass) / free
        row = [share if p is None else p for p in annotated]
    else:
        row = list(annotated)
    try:
        return _normalized_row(name, row)
    except GrammarError as exc:
        raise GrammarSyntaxError(str(exc), lineno) from None


def _quote(term: bytes) -> str:
    out = ['"']
    for b in term:
        if b == ord('"'):
            out.append('\\"')
        elif b == ord("\\"):
            out.append("\\\\")
        elif b == ord("\n"):
            out.append("\\n")
        elif b == ord("\t"):
            out.append("\\t")
        elif b == ord("\r"):
            out.append("\\r")
        elif 0x20 <= b < 0x7F:
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    out.append('"')
    return "".join(out)


def _rounded_row(row: Sequence[float]) -> list[int]:
    """Row in units of 10**-SAVE_DECIMALS, summing exactly to one.

    Largest-remainder rounding keeps every entry within one unit of its
    value, so a reloaded row never exceeds one by more than float noise.
    """
    scale = 10 ** SAVE_DECIMALS
    exact = [p * scale for p in row]
    units = [math.floor(x) for x in exact]
    short = scale - sum(units)
    by_remainder = sorted(range(len(row)), key=lambda j: (units[j] - exact[j], j))
    for j in by_remainder[:max(0, short)]:
        units[j] += 1
    return units


def save_grammar(g: ProbabilisticGrammar) -> bytes:
    """Serialize with every probability annotated to nine decimals.

    The start rule is written first, so a grammar whose start index is not
    zero comes back with its rules reordered.
    """
    order = [g.start] + [i for i in range(len(g.rules)) if i != g.start]
    lines = []
    for i in order:
        rule = g.rules[i]
        alts = []
        for alt, units in zip(rule.alternatives, _rounded_row(rule.probabilities)):
            body = " ".join(_quote(s) if isinstance(s, bytes) else g.rules[s].name
                            for s in alt.symbols) or '""'
            whole, frac = divmod(units, 10 ** SAVE_DECIMALS)
            alts.append(f"@{whole}.{frac:0{SAVE_DECIMALS}d} {body}")
        lines.append(f"{rule.name} = " + " | ".join(alts))
    return ("\n".join(lines) + "\n").encode("utf-8")
