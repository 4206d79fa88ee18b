"""Learning alternative probabilities from parse trees by expansion counting."""

from __future__ import annotations

from typing import Iterable

from .grammar import ProbabilisticGrammar
from .parsing import ParseTree, iter_nodes


def count_expansions(trees: Iterable[ParseTree], g: ProbabilisticGrammar) -> list[list[int]]:
    """counts[i][j] = number of nodes expanding rule i with alternative j."""
    counts = [[0] * len(rule.alternatives) for rule in g.rules]
    for tree in trees:
        for node, _, path in iter_nodes(tree):
            try:
                counts[node.rule][node.alt] += 1
            except IndexError:
                raise ValueError(
                    f"tree node at {path} ({node.rule}, {node.alt}) does not fit the grammar"
                ) from None
    return counts


def learn_probabilities(prior: ProbabilisticGrammar, trees: Iterable[ParseTree]) -> ProbabilisticGrammar:
    """Replace each exercised rule's distribution by its relative expansion counts.

    Rules that no tree exercises keep the prior's probabilities unchanged, so
    learning from a single input never zeroes out a whole rule.
    """
    counts = count_expansions(trees, prior)
    rows = []
    for rule, row in zip(prior.rules, counts):
        total = sum(row)
        rows.append([c / total for c in row] if total else rule.probabilities)
    return prior.with_probabilities(rows)
