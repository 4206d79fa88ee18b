"""Earley parsing of byte strings into canonical parse trees.

Terminals are literal byte strings matched atomically, so a chart set only
exists at positions where some terminal boundary can fall.  Empty terminals
and nullable rules are handled with the Aycock-Horspool prediction fix.

When a grammar is ambiguous the returned tree is canonical: walking top-down,
the lowest alternative index that can still derive the span wins, and within
an alternative earlier children take the longest span that still lets the
rest of the alternative match.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Union

from .grammar import ProbabilisticGrammar


@dataclass(frozen=True)
class Leaf:
    value: bytes


@dataclass(frozen=True)
class Node:
    rule: int
    alt: int
    children: tuple["ParseTree", ...]


ParseTree = Union[Node, Leaf]


class ParseError(ValueError):
    def __init__(self, offset: int, message: str | None = None):
        super().__init__(message or f"cannot parse input at byte offset {offset}")
        self.offset = offset


def unparse(tree: ParseTree) -> bytes:
    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.append(node.value)
        else:
            stack.extend(reversed(node.children))
    return b"".join(out)


def iter_nodes(tree: ParseTree, depth: int = 0, path: tuple = ()) -> Iterator[tuple[Node, int, tuple]]:
    """Pre-order walk over nonterminal nodes yielding (node, depth, path)."""
    stack = [(tree, depth, path)]
    while stack:
        node, d, p = stack.pop()
        if isinstance(node, Node):
            yield node, d, p
            for k in range(len(node.children) - 1, -1, -1):
                stack.append((node.children[k], d + 1, p + (k,)))


def check_tree(g: ProbabilisticGrammar, tree: ParseTree) -> None:
    """Raise ValueError unless ``tree`` is a derivation under ``g``."""
    for node, _, path in iter_nodes(tree):
        if not 0 <= node.rule < len(g.rules):
            raise ValueError(f"node at {path}: rule index {node.rule} out of range")
        alts = g.rules[node.rule].alternatives
        if not 0 <= node.alt < len(alts):
            raise ValueError(f"node at {path}: alternative {node.alt} out of range")
        symbols = alts[node.alt].symbols
        if len(symbols) != len(node.children):
            raise ValueError(f"node at {path}: arity mismatch")
        for sym, child in zip(symbols, node.children):
            if isinstance(sym, bytes):
                if not (isinstance(child, Leaf) and child.value == sym):
                    raise ValueError(f"node at {path}: terminal mismatch")
            elif not (isinstance(child, Node) and child.rule == sym):
                raise ValueError(f"node at {path}: expected rule {sym}")


def nullable_rules(g: ProbabilisticGrammar) -> frozenset[int]:
    nullable: set[int] = set()
    changed = True
    while changed:
        changed = False
        for i, rule in enumerate(g.rules):
            if i in nullable:
                continue
            for alt in rule.alternatives:
                if all((isinstance(s, bytes) and not s) or (isinstance(s, int) and s in nullable)
                       for s in alt.symbols):
                    nullable.add(i)
                    changed = True
                    break
    return frozenset(nullable)


class Parser:
    """Reusable parser bound to one grammar's structure."""

    def __init__(self, g: ProbabilisticGrammar):
        self.grammar = g
        self.symbols = [[alt.symbols for alt in rule.alternatives] for rule in g.rules]
        self.nullable = nullable_rules(g)

    def recognize(self, data: bytes):
        """Run the Earley recognizer.

        Returns (completed, furthest) where ``completed[(rule, alt, start)]``
        is the set of end offsets at which that alternative was completed.
        """
        n = len(data)
        symbols = self.symbols
        nullable = self.nullable
        sets: dict[int, list] = defaultdict(list)
        seen: dict[int, set] = defaultdict(set)
        # waiting[pos][rule] -> items in set ``pos`` whose next symbol is ``rule``
        waiting: dict[int, dict[int, list]] = defaultdict(lambda: defaultdict(list))
        completed: dict[tuple[int, int, int], set[int]] = defaultdict(set)
        furthest = 0

        def add(pos, item):
            if item not in seen[pos]:
                seen[pos].add(item)
                sets[pos].append(item)

        start = self.grammar.start
        for a in range(len(symbols[start])):
            add(0, (start, a, 0, 0))

        pos = 0
        while pos <= n:
            if pos not in sets:
                pos = min((p for p in sets if p > pos), default=n + 1)
                continue
            furthest = max(furthest, pos)
            items = sets[pos]
            i = 0
            while i < len(items):
                rule, alt, dot, origin = items[i]
                i += 1
                syms = symbols[rule][alt]
                if dot == len(syms):
                    ends = completed[(rule, alt, origin)]
                    if pos in ends:
                        continue
                    ends.add(pos)
                    for wr, wa, wd, wo in list(waiting[origin].get(rule, ())):
                        add(pos, (wr, wa, wd + 1, wo))
                    continue
                sym = syms[dot]
                if isinstance(sym, bytes):
                    if not sym:
                        add(pos, (rule, alt, dot + 1, origin))
                    elif data.startswith(sym, pos):
                        add(pos + len(sym), (rule, alt, dot + 1, origin))
                    else:
                        furthest = max(furthest, pos + _common_prefix(data, pos, sym))
                    continue
                bucket = waiting[pos][sym]
                bucket.append((rule, alt, dot, origin))
                if len(bucket) == 1:
                    for a in range(len(symbols[sym])):
                        add(pos, (sym, a, 0, pos))
                if sym in nullable:
                    add(pos, (rule, alt, dot + 1, origin))
                # Items completed earlier in this set must also advance late waiters.
                for a in range(len(symbols[sym])):
                    if pos in completed.get((sym, a, pos), ()):
                        add(pos, (rule, alt, dot + 1, origin))
            pos += 1
        return completed, furthest

    def parse(self, data: bytes) -> ParseTree:
        data = bytes(data)
        completed, furthest = self.recognize(data)
        n = len(data)
        start = self.grammar.start
        if not any(n in completed.get((start, a, 0), ()) for a in range(len(self.symbols[start]))):
            raise ParseError(min(furthest, n))
        return _TreeBuilder(self, data, completed).build(start, 0, n)


def _common_prefix(data: bytes, pos: int, sym: bytes) -> int:
    k = 0
    while k < len(sym) and pos + k < len(data) and data[pos + k] == sym[k]:
        k += 1
    return k


class _TreeBuilder:
    def __init__(self, parser: Parser, data: bytes, completed):
        self.symbols = parser.symbols
        self.data = data
        self.completed = completed
        ends_by_rule: dict[tuple[int, int], set[int]] = defaultdict(set)
        for (rule, _alt, start), ends in completed.items():
            ends_by_rule[(rule, start)] |= ends
        self.ends_by_rule = ends_by_rule
        self.feasible = lru_cache(maxsize=None)(self._feasible)

    def _feasible(self, rule: int, alt: int, k: int, pos: int, end: int) -> bool:
        """Can symbols[k:] of (rule, alt) derive data[pos:end]?"""
        syms = self.symbols[rule][alt]
        if k == len(syms):
            return pos == end
        sym = syms[k]
        if isinstance(sym, bytes):
            return (pos + len(sym) <= end and self.data.startswith(sym, pos)
                    and self.feasible(rule, alt, k + 1, pos + len(sym), end))
        return any(e <= end and self.feasible(rule, alt, k + 1, e, end)
                   for e in self.ends_by_rule.get((sym, pos), ()))

    def build(self, rule: int, start: int, end: int, active: frozenset = frozenset()) -> Node:
        node = self._build(rule, start, end, active)
        if node is None:  # pragma: no cover - guarded by the recognizer
            raise ParseError(start, "no acyclic derivation found")
        return node

    def _build(self, rule, start, end, active):
        key = (rule, start, end)
        if key in active:
            return None
        active = active | {key}
        for alt in range(len(self.symbols[rule])):
            if end not in self.completed.get((rule, alt, start), ()):
                continue
            if not self.feasible(rule, alt, 0, start, end):
                continue
            children = self._build_seq(rule, alt, 0, start, end, active)
            if children is not None:
                return Node(rule, alt, tuple(children))
        return None

    def _build_seq(self, rule, alt, k, pos, end, active):
        syms = self.symbols[rule][alt]
        if k == len(syms):
            return [] if pos == end else None
        sym = syms[k]
        if isinstance(sym, bytes):
            if not self.feasible(rule, alt, k, pos, end):
                return None
            rest = self._build_seq(rule, alt, k + 1, pos + len(sym), end, active)
            return None if rest is None else [Leaf(sym)] + rest
        candidates = sorted((e for e in self.ends_by_rule.get((sym, pos), ()) if e <= end),
                            reverse=True)
        for e in candidates:
            if not self.feasible(rule, alt, k + 1, e, end):
                continue
            child = self._build(sym, pos, e, active)
            if child is None:
                continue
            rest = self._build_seq(rule, alt, k + 1, e, end, active)
            if rest is not None:
                return [child] + rest
        return None


def structure_key(g: ProbabilisticGrammar) -> tuple:
    """Hashable key of a grammar's structure, ignoring probabilities."""
    return (g.start, tuple(tuple(a.symbols for a in r.alternatives) for r in g.rules))


def parse(g: ProbabilisticGrammar, data: bytes) -> ParseTree:
    """Parse ``data`` from the start rule; raises :class:`ParseError`."""
    key = structure_key(g)
    try:
        parser = _PARSERS[key]
    except KeyError:
        if len(_PARSERS) >= 32:
            _PARSERS.clear()
        parser = _PARSERS[key] = Parser(g)
    return parser.parse(data)


_PARSERS: dict[tuple, Parser] = {}
