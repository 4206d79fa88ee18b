"""Stochastic derivation of inputs from a probabilistic grammar.

Below the depth limit each nonterminal draws an alternative from the policy's
distribution.  From the depth limit on, the generator switches to the
alternative with the smallest completion depth so every derivation terminates.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

from .grammar import GrammarError, ProbabilisticGrammar, invert_probabilities
from .parsing import Leaf, Node, ParseTree


class Policy(enum.Enum):
    PROBABILISTIC = "prob"
    UNIFORM = "uniform"
    INVERSE = "inverse"


@dataclass(frozen=True)
class GenerationPolicy:
    kind: Policy = Policy.PROBABILISTIC
    depth_limit: int = 3

    def __post_init__(self):
        if self.depth_limit < 1:
            raise ValueError("depth_limit must be >= 1")


def min_completion_depth(g: ProbabilisticGrammar) -> dict[int, int]:
    """Height of the shallowest finite derivation tree for every rule."""
    inf = float("inf")
    depth = [inf] * len(g.rules)
    changed = True
    while changed:
        changed = False
        for i, rule in enumerate(g.rules):
            best = min(_alt_cost(alt.nonterminals, depth) for alt in rule.alternatives)
            if best < depth[i]:
                depth[i] = best
                changed = True
    dead = [g.rules[i].name for i, d in enumerate(depth) if d == inf]
    if dead:
        raise GrammarError(f"rules derive no finite string: {', '.join(dead)}")
    return {i: int(d) for i, d in enumerate(depth)}


def _alt_cost(nonterminals, depth) -> float:
    if not nonterminals:
        return 1
    return 1 + max(depth[nt] for nt in nonterminals)


class Generator:
    """Precomputes per-rule distributions and closure choices for one grammar."""

    def __init__(self, g: ProbabilisticGrammar, policy: GenerationPolicy = GenerationPolicy()):
        self.grammar = g
        self.policy = policy
        depth = min_completion_depth(g)
        self.closure = []
        for rule in g.rules:
            costs = [_alt_cost(alt.nonterminals, depth) for alt in rule.alternatives]
            self.closure.append(costs.index(min(costs)))
        if policy.kind is Policy.UNIFORM:
            rows = [[1.0 / len(r.alternatives)] * len(r.alternatives) for r in g.rules]
        elif policy.kind is Policy.INVERSE:
            rows = [r.probabilities for r in invert_probabilities(g).rules]
        else:
            rows = [r.probabilities for r in g.rules]
        self.cumulative = []
        for row in rows:
            acc, cum = 0.0, []
            for p in row:
                acc += p
                cum.append(acc)
            self.cumulative.append(cum)

    def choose(self, rule: int, rng: random.Random) -> int:
        cum = self.cumulative[rule]
        u = rng.random() * cum[-1]
        for j, c in enumerate(cum):
            if u < c:
                return j
        # Rounding put u at the very top; take the last alternative with mass.
        return max(j for j in range(len(cum)) if cum[j] > (cum[j - 1] if j else 0.0))

    def generate(self, rng: random.Random) -> ParseTree:
        g = self.grammar
        limit = self.policy.depth_limit
        return self._expand(g.start, 0, limit, rng)

    def _expand(self, rule: int, depth: int, limit: int, rng: random.Random) -> Node:
        alt = self.choose(rule, rng) if depth < limit else self.closure[rule]
        children = []
        for sym in self.grammar.rules[rule].alternatives[alt].symbols:
            if isinstance(sym, bytes):
                children.append(Leaf(sym))
            else:
                children.append(self._expand(sym, depth + 1, limit, rng))
        return Node(rule, alt, tuple(children))


def generate(g: ProbabilisticGrammar, policy: GenerationPolicy, rng: random.Random) -> ParseTree:
    return Generator(g, policy).generate(rng)


def generate_batch(g: ProbabilisticGrammar, policy: GenerationPolicy, n: int,
                   rng: random.Random) -> list[ParseTree]:
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = Generator(g, policy)
    return [gen.generate(rng) for _ in range(n)]
