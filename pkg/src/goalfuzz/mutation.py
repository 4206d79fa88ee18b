"""Input mutation operators: single bit flips and same-rule subtree swaps."""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass

from .grammar import ProbabilisticGrammar
from .parsing import Node, ParseTree, check_tree, iter_nodes, unparse


def flip_bit(data: bytes, position: int) -> bytes:
    """Flip bit ``position`` (byte ``position // 8``, bit 0 = least significant)."""
    if not 0 <= position < 8 * len(data):
        raise IndexError(f"bit {position} outside a {len(data)}-byte input")
    out = bytearray(data)
    out[position // 8] ^= 1 << (position % 8)
    return bytes(out)


def bit_flip(data: bytes, rng: random.Random, flips: int = 1) -> bytes:
    """Flip ``flips`` uniformly drawn bit positions (one draw per flip)."""
    if not data:
        raise ValueError("cannot bit-flip an empty input")
    for _ in range(flips):
        data = flip_bit(data, rng.randrange(8 * len(data)))
    return data


def subtree_at(tree: ParseTree, path: tuple[int, ...]) -> ParseTree:
    for k in path:
        tree = tree.children[k]
    return tree


def replace_subtree(tree: ParseTree, path: tuple[int, ...], new: ParseTree) -> ParseTree:
    if not path:
        return new
    head, rest = path[0], path[1:]
    children = list(tree.children)
    children[head] = replace_subtree(children[head], rest, new)
    return Node(tree.rule, tree.alt, tuple(children))


def _nested(a: tuple, b: tuple) -> bool:
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    return long_[:len(short)] == short


def swap_candidates(tree: ParseTree) -> list[tuple[tuple, tuple]]:
    """All unordered pairs of same-rule nodes where neither contains the other."""
    by_rule = defaultdict(list)
    for node, _, path in iter_nodes(tree):
        by_rule[node.rule].append(path)
    pairs = []
    for rule in sorted(by_rule):
        paths = by_rule[rule]
        for i in range(len(paths)):
            for j in range(i + 1, len(paths)):
                if not _nested(paths[i], paths[j]):
                    pairs.append((paths[i], paths[j]))
    return pairs


def swap_subtrees(tree: ParseTree, a: tuple, b: tuple) -> ParseTree:
    if _nested(a, b):
        raise ValueError("cannot swap a subtree with its own ancestor")
    sub_a, sub_b = subtree_at(tree, a), subtree_at(tree, b)
    if not (isinstance(sub_a, Node) and isinstance(sub_b, Node) and sub_a.rule == sub_b.rule):
        raise ValueError("swapped subtrees must expand the same rule")
    return replace_subtree(replace_subtree(tree, a, sub_b), b, sub_a)


def subtree_swap(tree: ParseTree, rng: random.Random) -> ParseTree:
    """Swap one uniformly drawn candidate pair; unchanged if there is none.

    Consumes one ``randrange`` draw only when candidates exist.
    """
    pairs = swap_candidates(tree)
    if not pairs:
        return tree
    a, b = pairs[rng.randrange(len(pairs))]
    return swap_subtrees(tree, a, b)


@dataclass(frozen=True)
class MutationConfig:
    bitflip_fraction: float = 0.5
    flips: int = 1

    def __post_init__(self):
        if not 0.0 <= self.bitflip_fraction <= 1.0:
            raise ValueError("bitflip_fraction must lie in [0, 1]")
        if self.flips < 1:
            raise ValueError("flips must be >= 1")


def mutate_inputs(trees: list[ParseTree], g: ProbabilisticGrammar, rng: random.Random,
                  config: MutationConfig = MutationConfig()) -> list[bytes]:
    """One mutant per tree, in order.

    Per tree: one ``random()`` draw picks the mode (bit flip when below
    ``bitflip_fraction``), then the operator consumes its own draws.
    """
    if not trees:
        raise ValueError("no inputs to mutate")
    mutants = []
    for tree in trees:
        check_tree(g, tree)
        if rng.random() < config.bitflip_fraction:
            data = unparse(tree)
            mutants.append(bit_flip(data, rng, config.flips) if data else data)
        else:
            mutants.append(unparse(subtree_swap(tree, rng)))
    return mutants
