"""The generational feedback loop.

One generation::

    T  := n inputs drawn from G_i (probabilistic policy)
    T  := T + one mutant per input                      (2n candidates)
    parse and execute every candidate
    score each candidate by its marginal contribution to the campaign
    s  := best candidate (first index on ties); add s to the suite I
    G' := probabilities learned from s's parse tree (G_i if s does not parse)
    G_{i+1} := G' with one random rule made uniform

Randomness comes from a single ``random.Random(seed)`` consumed in a fixed
order: a_max calibration (only when a_max is not given), then per generation
the n derivations, the n mutations and finally the grammar-mutation draw.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .feedback import RawFeedback, SubjectAdapter, run_many
from .fitness import (FitnessWeights, GoalMode, compute_mappings, extract_features,
                      fitness, normalize_feedback, weights_for_mode)
from .generation import GenerationPolicy, Generator, Policy, min_completion_depth
from .grammar import (GrammarError, ProbabilisticGrammar, check_normalized, mutate_grammar,
                      save_grammar, uniform)
from .learning import learn_probabilities
from .mutation import MutationConfig, mutate_inputs
from .parsing import ParseError, ParseTree, parse, unparse

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ("gen", "fitness", "coverage", "mappings", "exceptions",
                  "unique_exceptions", "runtime_total")


@dataclass
class CampaignConfig:
    grammar: ProbabilisticGrammar
    seeds: Sequence[bytes]
    subject: SubjectAdapter
    mode: GoalMode
    generations: int = 50
    inputs_per_generation: int = 5
    depth_limit: int = 3
    feature_depth: int = 3
    # Statement budget for built-in subjects, milliseconds for external ones;
    # None means the subject's default.
    timeout: float | None = None
    random_seed: int = 0
    a_max: float | None = None
    calibration_samples: int = 100
    mutation: MutationConfig = field(default_factory=MutationConfig)
    workers: int = 1
    out_dir: Path | None = None

    def __post_init__(self):
        if self.generations < 1 or self.inputs_per_generation < 1:
            raise ValueError("generations and inputs_per_generation must be >= 1")
        if self.timeout is None:
            self.timeout = self.subject.default_timeout
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.a_max is not None and self.a_max <= 0:
            raise ValueError("a_max must be positive")
        if self.depth_limit < 1 or self.feature_depth < 1:
            raise ValueError("depth limits must be >= 1")


@dataclass(frozen=True)
class Candidate:
    data: bytes
    tree: ParseTree | None
    feedback: RawFeedback
    mappings: frozenset


@dataclass(frozen=True)
class RawMetrics:
    """Marginal raw metrics of one candidate against the campaign so far."""

    new_mappings: int
    new_units: int
    runtime: float
    exceptions: int
    new_unique_exceptions: int
    timed_out: bool = False


@dataclass
class CampaignState:
    grammar: ProbabilisticGrammar
    covered: set = field(default_factory=set)
    mappings: set = field(default_factory=set)
    exceptions: int = 0
    unique_exceptions: set = field(default_factory=set)
    runtime_total: float = 0.0
    selected: list = field(default_factory=list)

    def merge(self, cand: Candidate) -> None:
        self.selected.append(cand.data)
        self.covered |= cand.feedback.covered_units
        self.mappings |= cand.mappings
        self.runtime_total += cand.feedback.runtime
        if cand.feedback.exception is not None:
            self.exceptions += 1
            self.unique_exceptions.add(cand.feedback.exception)


@dataclass(frozen=True)
class GenerationRecord:
    gen: int
    selected_input: bytes
    fitness: float
    coverage: float
    mappings: int
    exceptions: int
    unique_exceptions: tuple[str, ...]
    runtime_total: float

    def summary_row(self) -> dict:
        return {"gen": self.gen, "fitness": self.fitness, "coverage": self.coverage,
                "mappings": self.mappings, "exceptions": self.exceptions,
                "unique_exceptions": len(self.unique_exceptions),
                "runtime_total": self.runtime_total}


@dataclass
class CampaignResult:
    records: list[GenerationRecord]
    initial_grammar: ProbabilisticGrammar
    final_grammar: ProbabilisticGrammar
    selected: list[bytes]
    a_max: float

    @property
    def unique_exceptions(self) -> tuple[str, ...]:
        return self.records[-1].unique_exceptions if self.records else ()

    @property
    def coverage(self) -> float:
        return self.records[-1].coverage if self.records else 0.0


def candidate_metrics(cand: Candidate, state: CampaignState) -> RawMetrics:
    exc = cand.feedback.exception
    return RawMetrics(
        new_mappings=len(cand.mappings - state.mappings),
        new_units=len(cand.feedback.covered_units - state.covered),
        runtime=cand.feedback.runtime,
        exceptions=int(exc is not None),
        new_unique_exceptions=int(exc is not None and exc not in state.unique_exceptions),
        timed_out=cand.feedback.timed_out,
    )


def score(m: RawMetrics, weights: FitnessWeights, *, a_max: float, total_units: int,
          timeout: float) -> float:
    x = normalize_feedback(m.new_mappings, min(m.new_units, total_units),
                           min(m.runtime, timeout), m.exceptions, m.new_unique_exceptions,
                           a_max=a_max, b_tot=total_units, timeout=timeout, inputs=1,
                           timed_out=m.timed_out)
    return fitness(x, weights)


def select_best(scores: Sequence[float]) -> int:
    if not scores:
        raise ValueError("no candidates to select from")
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def try_parse(g: ProbabilisticGrammar, data: bytes) -> ParseTree | None:
    try:
        return parse(g, data)
    except ParseError:
        return None


def evaluate(g: ProbabilisticGrammar, inputs: Sequence[bytes], subject: SubjectAdapter,
             timeout: float, feature_depth: int, workers: int = 1) -> list[Candidate]:
    feedback = run_many(subject, inputs, timeout, workers)
    out = []
    for data, fb in zip(inputs, feedback):
        tree = try_parse(g, data)
        feats = extract_features(tree, feature_depth)
        out.append(Candidate(data, tree, fb, compute_mappings(feats, fb.covered_units)))
    return out


def calibrate_max_mappings(subject: SubjectAdapter, grammar: ProbabilisticGrammar,
                           samples: int, rng: random.Random, *, depth_limit: int = 3,
                           feature_depth: int = 3, timeout: float | None = None) -> int:
    """Largest single-input mapping count over ``samples`` uniform-policy inputs."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if timeout is None:
        timeout = subject.default_timeout
    gen = Generator(grammar, GenerationPolicy(Policy.UNIFORM, depth_limit))
    inputs = [unparse(gen.generate(rng)) for _ in range(samples)]
    cands = evaluate(grammar, inputs, subject, timeout, feature_depth)
    return max(1, max(len(c.mappings) for c in cands))


def load_seed_trees(g: ProbabilisticGrammar, seeds: Sequence[bytes]) -> list[ParseTree]:
    trees = []
    for i, seed in enumerate(seeds):
        tree = try_parse(g, seed)
        if tree is None:
            log.warning("seed %d does not parse; skipped", i)
        else:
            trees.append(tree)
    if not trees:
        raise ValueError("no usable seed inputs (none of them parse)")
    return trees


MetricsFn = Callable[[Candidate, CampaignState], RawMetrics]


class Campaign:
    def __init__(self, cfg: CampaignConfig, metrics: MetricsFn = candidate_metrics):
        self.cfg = cfg
        self.metrics = metrics
        self.weights = weights_for_mode(cfg.mode)
        self.rng = random.Random(cfg.random_seed)
        min_completion_depth(cfg.grammar)
        seed_trees = load_seed_trees(cfg.grammar, cfg.seeds)
        self.initial_grammar = learn_probabilities(uniform(cfg.grammar), seed_trees)
        if cfg.a_max is not None:
            self.a_max = cfg.a_max
        else:
            self.a_max = calibrate_max_mappings(
                cfg.subject, self.initial_grammar, cfg.calibration_samples, self.rng,
                depth_limit=cfg.depth_limit, feature_depth=cfg.feature_depth,
                timeout=cfg.timeout)
        self.state = CampaignState(self.initial_grammar)
        self.records: list[GenerationRecord] = []

    def score(self, cand: Candidate) -> float:
        return score(self.metrics(cand, self.state), self.weights, a_max=self.a_max,
                     total_units=self.cfg.subject.total_units, timeout=self.cfg.timeout)

    def run_generation(self) -> GenerationRecord:
        cfg, rng, state = self.cfg, self.rng, self.state
        g = state.grammar
        gen = Generator(g, GenerationPolicy(Policy.PROBABILISTIC, cfg.depth_limit))
        trees = [gen.generate(rng) for _ in range(cfg.inputs_per_generation)]
        mutants = mutate_inputs(trees, g, rng, cfg.mutation)
        inputs = [unparse(t) for t in trees] + mutants
        cands = evaluate(g, inputs, cfg.subject, cfg.timeout, cfg.feature_depth, cfg.workers)
        scores = [self.score(c) for c in cands]
        best = select_best(scores)
        chosen = cands[best]
        state.merge(chosen)
        learned = learn_probabilities(g, [chosen.tree]) if chosen.tree is not None else g
        state.grammar = mutate_grammar(learned, rng)
        check_normalized(state.grammar)
        record = GenerationRecord(
            gen=len(self.records),
            selected_input=chosen.data,
            fitness=scores[best],
            coverage=len(state.covered) / cfg.subject.total_units,
            mappings=len(state.mappings),
            exceptions=state.exceptions,
            unique_exceptions=tuple(sorted(state.unique_exceptions)),
            runtime_total=state.runtime_total,
        )
        self.records.append(record)
        return record

    def run(self) -> CampaignResult:
        for _ in range(self.cfg.generations):
            self.run_generation()
        result = CampaignResult(self.records, self.initial_grammar, self.state.grammar,
                                list(self.state.selected), self.a_max)
        if self.cfg.out_dir is not None:
            write_outputs(Path(self.cfg.out_dir), result)
        return result


def run_campaign(cfg: CampaignConfig, metrics: MetricsFn = candidate_metrics) -> CampaignResult:
    return Campaign(cfg, metrics).run()


# --- baselines ----------------------------------------------------------------

def run_baseline(grammar: ProbabilisticGrammar, seeds: Sequence[bytes], subject: SubjectAdapter,
                 policy: Policy, count: int, *, inputs_per_generation: int = 5,
                 depth_limit: int = 3, feature_depth: int = 3, timeout: float | None = None,
                 random_seed: int = 0, a_max: float | None = None,
                 calibration_samples: int = 100, out_dir: Path | None = None,
                 workers: int = 1) -> CampaignResult:
    """Plain grammar-based generation without feedback.

    Every generated input joins the suite.  Records are emitted per block of
    ``inputs_per_generation`` inputs; the fitness column is the block's best
    marginal fitness under equal weights, for comparison only.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if timeout is None:
        timeout = subject.default_timeout
    rng = random.Random(random_seed)
    base = learn_probabilities(uniform(grammar), load_seed_trees(grammar, seeds)) \
        if seeds else grammar
    if a_max is None:
        a_max = calibrate_max_mappings(subject, base, calibration_samples, rng,
                                       depth_limit=depth_limit, feature_depth=feature_depth,
                                       timeout=timeout)
    gen = Generator(base, GenerationPolicy(policy, depth_limit))
    weights = FitnessWeights()
    state = CampaignState(base)
    records = []
    produced = 0
    while produced < count:
        k = min(inputs_per_generation, count - produced)
        inputs = [unparse(gen.generate(rng)) for _ in range(k)]
        produced += k
        cands = evaluate(base, inputs, subject, timeout, feature_depth, workers)
        best_score = float("-inf")
        best_input = b""
        for cand in cands:
            s = score(candidate_metrics(cand, state), weights, a_max=a_max,
                      total_units=subject.total_units, timeout=timeout)
            if s > best_score:
                best_score, best_input = s, cand.data
            state.merge(cand)
        records.append(GenerationRecord(
            gen=len(records), selected_input=best_input, fitness=best_score,
            coverage=len(state.covered) / subject.total_units,
            mappings=len(state.mappings), exceptions=state.exceptions,
            unique_exceptions=tuple(sorted(state.unique_exceptions)),
            runtime_total=state.runtime_total))
    result = CampaignResult(records, base, base, list(state.selected), a_max)
    if out_dir is not None:
        write_outputs(Path(out_dir), result)
    return result


# --- outputs -------------------------------------------------------------------

def summary_csv(records: Sequence[GenerationRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.summary_row())
    return buf.getvalue()


def write_outputs(out: Path, result: CampaignResult) -> None:
    inputs_dir = out / "inputs"
    inputs_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in result.records:
        name = f"inputs/gen{rec.gen}.txt"
        (out / name).write_bytes(rec.selected_input)
        row = rec.summary_row()
        row["selected_input_file"] = name
        lines.append(json.dumps(row, sort_keys=False))
    (out / "campaign.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "summary.csv").write_text(summary_csv(result.records), encoding="utf-8")
    (out / "final_grammar.bnf").write_bytes(save_grammar(result.final_grammar))


def read_summary(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(SUMMARY_FIELDS) - set(rows[0] if rows else SUMMARY_FIELDS)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return [{k: float(v) for k, v in row.items()} for row in rows]


__all__ = [
    "Campaign", "CampaignConfig", "CampaignResult", "CampaignState", "Candidate",
    "GenerationRecord", "RawMetrics", "calibrate_max_mappings", "candidate_metrics",
    "read_summary", "run_baseline", "run_campaign", "score", "select_best",
    "summary_csv", "write_outputs", "GrammarError",
]
