"""Input features, input-to-code mappings and the weighted-sum fitness."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

from .parsing import Node, ParseTree

Feature = frozenset  # frozenset[int] of rule indices
Mapping = tuple      # (Feature, unit id)


def extract_features(tree: ParseTree | None, depth: int = 3) -> frozenset[Feature]:
    """Rule-index sets of every downward nonterminal chain with <= ``depth`` edges.

    ``None`` (an input that did not parse) has no features.
    """
    if depth < 1:
        raise ValueError("feature depth must be >= 1")
    features = set()
    if tree is None:
        return frozenset()
    # Each stack entry carries the chain of rule indices ending at the node.
    stack = [(tree, ())]
    while stack:
        node, chain = stack.pop()
        if not isinstance(node, Node):
            continue
        chain = (chain + (node.rule,))[-(depth + 1):]
        for k in range(len(chain)):
            features.add(frozenset(chain[k:]))
        for child in node.children:
            stack.append((child, chain))
    return frozenset(features)


def compute_mappings(features: Iterable[Feature], units: Iterable[str]) -> frozenset[Mapping]:
    units = list(units)
    return frozenset((f, e) for f in features for e in units)


class Goal(enum.Enum):
    MAPPINGS = "mappings"
    COVERAGE = "coverage"
    RUNTIME = "runtime"
    EXCEPTIONS = "exceptions"


_GOAL_ORDER = (Goal.MAPPINGS, Goal.COVERAGE, Goal.RUNTIME, Goal.EXCEPTIONS)


@dataclass(frozen=True)
class FitnessWeights:
    mappings: float = 1.0
    coverage: float = 1.0
    runtime: float = 1.0
    exceptions: float = 1.0

    def __post_init__(self):
        values = self.as_tuple()
        if any(w < 0 for w in values):
            raise ValueError("fitness weights must be nonnegative")
        if not any(w > 0 for w in values):
            raise ValueError("at least one fitness weight must be positive")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.mappings, self.coverage, self.runtime, self.exceptions)

    def scaled(self, factor: float) -> FitnessWeights:
        return FitnessWeights(*(w * factor for w in self.as_tuple()))


@dataclass(frozen=True)
class GoalMode:
    kind: str  # "single", "multiple" or "ignore"
    goal: Goal | None = None

    def __post_init__(self):
        if self.kind not in ("single", "multiple", "ignore"):
            raise ValueError(f"unknown goal mode {self.kind!r}")
        if self.kind == "multiple" and self.goal is not None:
            raise ValueError("mode 'multiple' takes no goal")
        if self.kind != "multiple" and self.goal is None:
            raise ValueError(f"mode {self.kind!r} needs a goal")

    @classmethod
    def parse(cls, text: str) -> GoalMode:
        """``single:<goal>``, ``multiple`` or ``ignore:<goal>``."""
        kind, _, goal = text.partition(":")
        return cls(kind, Goal(goal) if goal else None)

    def __str__(self):
        return self.kind if self.goal is None else f"{self.kind}:{self.goal.value}"


def weights_for_mode(mode: GoalMode) -> FitnessWeights:
    if mode.kind == "multiple":
        return FitnessWeights()
    focus = 10.0 if mode.kind == "single" else 0.0
    return FitnessWeights(*(focus if g is mode.goal else 1.0 for g in _GOAL_ORDER))


@dataclass(frozen=True)
class NormalizedFeedback:
    x1: float
    x2: float
    x3: float
    x4: float

    def __post_init__(self):
        for name, v in zip(("x1", "x2", "x3", "x4"), self.as_tuple()):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.x2, self.x3, self.x4)


def normalize_feedback(a: float, b: float, c: float, d: float, e: float, *,
                       a_max: float, b_tot: float, timeout: float, inputs: float,
                       timed_out: bool = False) -> NormalizedFeedback:
    """Map raw metrics to [0, 1].

    a: mappings, b: covered units, c: runtime, d: exceptions,
    e: unique exceptions.  Mappings pass through x / (1 + |x|) after
    scaling by ``a_max``; a timed-out run scores x3 = 1.
    """
    if a_max <= 0 or b_tot <= 0 or timeout <= 0 or inputs <= 0:
        raise ValueError("a_max, b_tot, timeout and inputs must be positive")
    if min(a, b, c, d, e) < 0:
        raise ValueError("raw metrics must be nonnegative")
    if b > b_tot:
        raise ValueError(f"covered units {b} exceed total {b_tot}")
    if c > timeout:
        raise ValueError(f"runtime {c} exceeds timeout {timeout}")
    if d > inputs or e > inputs:
        raise ValueError("exception counts exceed the number of inputs")
    ratio = a / a_max
    return NormalizedFeedback(
        ratio / (1 + abs(ratio)),
        b / b_tot,
        1.0 if timed_out else c / timeout,
        (0.1 * d + 0.9 * e) / inputs,
    )


def fitness(x: NormalizedFeedback, w: FitnessWeights) -> float:
    return (w.mappings * x.x1 + w.coverage * x.x2
            + w.runtime * x.x3 + w.exceptions * x.x4)
