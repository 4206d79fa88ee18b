"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import math
import random
import sys
from pathlib import Path

from .engine import CampaignConfig, SUMMARY_FIELDS, read_summary, run_baseline, run_campaign
from .feedback import ExternalSubject, SubjectAdapter, SubjectLaunchError
from .fitness import GoalMode
from .generation import GenerationPolicy, Policy, generate_batch
from .grammar import GrammarError, load_grammar, save_grammar, uniform
from .learning import learn_probabilities
from .mutation import MutationConfig
from .parsing import ParseError, parse, unparse
from .stats import mann_whitney_u, odds_ratio, spearman_rho
from .subjects import BUILTIN_SUBJECTS

log = logging.getLogger("goalfuzz")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _mode(text: str) -> GoalMode:
    try:
        return GoalMode.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("expected a value in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goalfuzz",
                                     description="Goal-directed grammar-based fuzzing.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def grammar_arg(p, required=True):
        p.add_argument("--grammar", type=Path, required=required, help="grammar file (.bnf)")

    def subject_args(p):
        p.add_argument("--subject", required=True,
                       help="builtin:<name> (%s) or exec:<command line>"
                       % ", ".join(sorted(BUILTIN_SUBJECTS)))
        p.add_argument("--total-units", type=_positive_int,
                       help="number of coverage units of an external subject")
        p.add_argument("--timeout-ms", type=_positive_float,
                       help="per-run timeout; a statement budget for built-in subjects "
                       "(default: the subject's own)")
        p.add_argument("--depth-limit", type=_positive_int, default=3)
        p.add_argument("--feature-depth", type=_positive_int, default=3)
        p.add_argument("--random-seed", type=int, default=0)
        p.add_argument("--a-max", type=_positive_float,
                       help="mapping normalizer (calibrated when omitted)")
        p.add_argument("--inputs-per-gen", type=_positive_int, default=5)
        p.add_argument("--workers", type=_positive_int, default=1)
        p.add_argument("--out", type=Path, required=True, help="output directory")

    run = sub.add_parser("run", help="run a goal-directed campaign")
    grammar_arg(run)
    run.add_argument("--seeds", type=Path, required=True, help="directory of seed inputs")
    subject_args(run)
    run.add_argument("--mode", type=_mode, default=GoalMode("multiple"),
                     help="single:<goal>, multiple or ignore:<goal>; goals: "
                     "mappings, coverage, runtime, exceptions")
    run.add_argument("--generations", type=_positive_int, default=50)
    run.add_argument("--bitflip-fraction", type=_fraction, default=0.5)

    learn = sub.add_parser("learn", help="annotate a grammar with seed probabilities")
    grammar_arg(learn)
    learn.add_argument("--seeds", type=Path, required=True)
    learn.add_argument("--out", type=Path, help="output grammar file (default: stdout)")

    gen = sub.add_parser("generate", help="generate inputs from a grammar")
    grammar_arg(gen)
    gen.add_argument("--policy", choices=[p.value for p in Policy], default="prob")
    gen.add_argument("--count", type=_positive_int, default=10)
    gen.add_argument("--depth-limit", type=_positive_int, default=3)
    gen.add_argument("--random-seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True, help="output directory")

    base = sub.add_parser("baseline", help="plain generation without feedback")
    grammar_arg(base)
    base.add_argument("--seeds", type=Path,
                      help="seed directory; probabilities are learned from it when given")
    subject_args(base)
    base.add_argument("--policy", choices=[p.value for p in Policy], default="uniform")
    base.add_argument("--count", type=_positive_int, default=250)

    stats = sub.add_parser("stats", help="compare final rows of summary.csv files")
    stats.add_argument("--a", nargs="+", type=Path, required=True, metavar="CSV")
    stats.add_argument("--b", nargs="+", type=Path, required=True, metavar="CSV")
    stats.add_argument("--spearman", nargs=2, metavar=("X", "Y"),
                       help="rank correlation of two metrics over all final rows")
    stats.add_argument("--table", nargs=4, type=int, metavar=("N11", "N12", "N21", "N22"),
                       help="2x2 counts for an odds ratio with Fisher's exact test")
    return parser


def _require_file(path: Path) -> None:
    if not path.is_file():
        raise UsageError(f"no such file: {path}")


def _require_dir(path: Path) -> None:
    if not path.is_dir():
        raise UsageError(f"no such directory: {path}")


def _make_subject(args) -> SubjectAdapter:
    kind, sep, rest = args.subject.partition(":")
    if not sep or not rest:
        raise UsageError("--subject must be builtin:<name> or exec:<command line>")
    if kind == "builtin":
        if rest not in BUILTIN_SUBJECTS:
            raise UsageError(f"unknown built-in subject {rest!r}; "
                             f"choose from {', '.join(sorted(BUILTIN_SUBJECTS))}")
        return BUILTIN_SUBJECTS[rest]()
    if kind == "exec":
        if args.total_units is None:
            raise UsageError("--total-units is required for exec: subjects")
        return ExternalSubject(rest, args.total_units)
    raise UsageError(f"unknown subject kind {kind!r}")


def read_seeds(folder: Path) -> list[bytes]:
    return [p.read_bytes() for p in sorted(folder.iterdir()) if p.is_file()]


def _load(path: Path):
    return load_grammar(path.read_text(encoding="utf-8"))


def cmd_run(args) -> int:
    _require_file(args.grammar)
    _require_dir(args.seeds)
    subject = _make_subject(args)
    cfg = CampaignConfig(
        grammar=_load(args.grammar), seeds=read_seeds(args.seeds), subject=subject,
        mode=args.mode, generations=args.generations,
        inputs_per_generation=args.inputs_per_gen, depth_limit=args.depth_limit,
        feature_depth=args.feature_depth, timeout=args.timeout_ms,
        random_seed=args.random_seed, a_max=args.a_max,
        mutation=MutationConfig(args.bitflip_fraction), workers=args.workers,
        out_dir=args.out)
    result = run_campaign(cfg)
    last = result.records[-1]
    print(f"generations: {len(result.records)}  coverage: {last.coverage:.1%}  "
          f"mappings: {last.mappings}  exceptions: {last.exceptions}  "
          f"unique: {', '.join(last.unique_exceptions) or '-'}  "
          f"runtime_total: {last.runtime_total:g}")
    print(f"outputs written to {args.out}")
    return 0


def cmd_learn(args) -> int:
    _require_file(args.grammar)
    _require_dir(args.seeds)
    g = _load(args.grammar)
    trees = []
    for i, seed in enumerate(read_seeds(args.seeds)):
        try:
            trees.append(parse(g, seed))
        except ParseError as exc:
            log.warning("seed %d skipped: %s", i, exc)
    if not trees:
        raise ValueError("no seed input parses")
    text = save_grammar(learn_probabilities(uniform(g), trees))
    if args.out is None:
        sys.stdout.write(text.decode("utf-8"))
    else:
        args.out.write_bytes(text)
    return 0


def cmd_generate(args) -> int:
    _require_file(args.grammar)
    g = _load(args.grammar)
    trees = generate_batch(g, GenerationPolicy(Policy(args.policy), args.depth_limit),
                           args.count, random.Random(args.random_seed))
    args.out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(args.count - 1)))
    for i, tree in enumerate(trees):
        (args.out / f"input_{i:0{width}d}.txt").write_bytes(unparse(tree))
    print(f"{len(trees)} inputs written to {args.out}")
    return 0


def cmd_baseline(args) -> int:
    _require_file(args.grammar)
    if args.seeds is not None:
        _require_dir(args.seeds)
    subject = _make_subject(args)
    seeds = read_seeds(args.seeds) if args.seeds is not None else []
    result = run_baseline(
        _load(args.grammar), seeds, subject, Policy(args.policy), args.count,
        inputs_per_generation=args.inputs_per_gen, depth_limit=args.depth_limit,
        feature_depth=args.feature_depth, timeout=args.timeout_ms,
        random_seed=args.random_seed, a_max=args.a_max, out_dir=args.out,
        workers=args.workers)
    last = result.records[-1]
    print(f"inputs: {args.count}  coverage: {last.coverage:.1%}  mappings: {last.mappings}  "
          f"exceptions: {last.exceptions}  unique: {', '.join(last.unique_exceptions) or '-'}  "
          f"runtime_total: {last.runtime_total:g}")
    return 0


def _final_rows(paths) -> list[dict]:
    rows = []
    for path in paths:
        _require_file(path)
        table = read_summary(path)
        if not table:
            raise ValueError(f"{path}: no rows")
        rows.append(table[-1])
    return rows


def cmd_stats(args) -> int:
    a, b = _final_rows(args.a), _final_rows(args.b)
    metrics = [m for m in SUMMARY_FIELDS if m != "gen"]
    print(f"{'metric':<18}{'median A':>12}{'median B':>12}{'U':>9}{'z':>9}{'p':>9}")
    for m in metrics:
        xa, xb = [r[m] for r in a], [r[m] for r in b]
        res = mann_whitney_u(xa, xb)
        print(f"{m:<18}{_median(xa):>12.4g}{_median(xb):>12.4g}"
              f"{res.U:>9.1f}{res.z:>9.3f}{res.p:>9.4f}")
    if args.spearman:
        x, y = args.spearman
        for name in (x, y):
            if name not in metrics:
                raise UsageError(f"unknown metric {name!r}")
        rows = a + b
        rho = spearman_rho([r[x] for r in rows], [r[y] for r in rows])
        print(f"spearman({x}, {y}) = {rho:.4f}")
    if args.table:
        n11, n12, n21, n22 = args.table
        if min(args.table) < 0:
            raise UsageError("table counts must be nonnegative")
        res = odds_ratio([[n11, n12], [n21, n22]])
        ratio = "inf" if math.isinf(res.odds_ratio) else f"{res.odds_ratio:.4g}"
        print(f"odds ratio = {ratio} (p = {res.p:.4g})")
    return 0


def _median(values):
    s = sorted(values)
    mid = len(s) // 2
    return s[mid] if len(s) % 2 else (s[mid - 1] + s[mid]) / 2


COMMANDS = {"run": cmd_run, "learn": cmd_learn, "generate": cmd_generate,
            "baseline": cmd_baseline, "stats": cmd_stats}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"goalfuzz: error: {exc}", file=sys.stderr)
        return 2
    except (GrammarError, ParseError, SubjectLaunchError, ValueError, OSError) as exc:
        print(f"goalfuzz: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
