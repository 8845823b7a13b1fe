"""Command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on data errors (missing or
malformed input files, bad concept text, too few examples).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from .concept import ConceptSyntaxError, RoleKindError, parse
from .evolve import MUTATIONS, GPConfig
from .harness import cross_validate, generate_family_data, learn
from .initialization import INIT_METHODS
from .kb import KBError, load_kb_file
from .retrieval import Retriever, load_problem_file
from .splits import calculate_splits

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_evolution_flags(p: argparse.ArgumentParser) -> None:
    d = GPConfig()
    g = p.add_argument_group("evolution")
    g.add_argument("--population", type=int, default=d.population_size)
    g.add_argument("--generations", type=int, default=d.generations)
    g.add_argument("--tournament", type=int, default=d.tournament_size)
    g.add_argument("--p-crossover", type=float, default=d.p_crossover)
    g.add_argument("--p-mutation", type=float, default=d.p_mutation)
    g.add_argument("--depth-limit", type=int, default=d.depth_limit)
    g.add_argument("--gain-x", type=float, default=d.parsimony_x,
                   help="accuracy weight in the parsimony fitness (default %(default)s)")
    g.add_argument("--mutation", choices=[m.replace("_", "-") for m in MUTATIONS],
                   default=d.mutation_variant)
    g.add_argument("--init", choices=INIT_METHODS, default=d.init_method)
    g.add_argument("--max-t", type=int, default=d.max_t)
    g.add_argument("--k-splits", type=int, default=d.k_splits)
    g.add_argument("--max-cardinality", type=int, default=d.max_cardinality)
    g.add_argument("--no-data-properties", action="store_true",
                   help="never use numeric or boolean restrictions")
    g.add_argument("--timeout-secs", type=float, default=d.timeout)
    g.add_argument("--seed", type=int, default=d.seed)


def _add_report_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="report file (default: stdout)")
    p.add_argument("--format", choices=["json", "tsv"], default="json")
    p.add_argument("--timings", action="store_true", help="include per-fold wall time in JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conceptevo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("learn", help="single run on all examples")
    p.add_argument("--kb", required=True)
    p.add_argument("--problem", required=True)
    _add_evolution_flags(p)
    _add_report_flags(p)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    p.add_argument("--kb", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--shuffle-seed", type=int, help="fold shuffle seed (default: --seed)")
    _add_evolution_flags(p)
    _add_report_flags(p)

    p = sub.add_parser("gen-family", help="write a synthetic kinship KB and learning problems")
    p.add_argument("--families", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--with-age", action="store_true",
                   help="add ages and write age.txt (age >= 45 problem)")

    p = sub.add_parser("splits", help="dump the precomputed threshold table as JSON")
    p.add_argument("--kb", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--k-splits", type=int, default=GPConfig.k_splits)
    p.add_argument("--out")

    p = sub.add_parser("retrieve", help="list the instances of a concept")
    p.add_argument("--kb", required=True)
    p.add_argument("--concept", required=True)
    return parser


def _config(args: argparse.Namespace) -> GPConfig:
    try:
        return GPConfig(
            population_size=args.population, generations=args.generations,
            tournament_size=args.tournament, p_crossover=args.p_crossover,
            p_mutation=args.p_mutation, depth_limit=args.depth_limit,
            parsimony_x=args.gain_x, max_t=args.max_t, k_splits=args.k_splits,
            max_cardinality=args.max_cardinality, timeout=args.timeout_secs, seed=args.seed,
            init_method=args.init, mutation_variant=args.mutation.replace("-", "_"),
            use_data_properties=not args.no_data_properties,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def worker_count() -> int:
    raw = os.environ.get("EVOLEARNER_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"EVOLEARNER_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError("EVOLEARNER_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run(args: argparse.Namespace) -> None:
    if args.command == "gen-family":
        if args.families < 1:
            raise UsageError("--families must be >= 1")
        data = generate_family_data(args.families, args.seed, with_age=args.with_age)
        os.makedirs(args.out_dir, exist_ok=True)
        files = {"kb.txt": data.kb_text, "uncle.txt": data.uncle_text}
        if args.with_age:
            files["age.txt"] = data.age_text
        for name, text in files.items():
            with open(os.path.join(args.out_dir, name), "w", encoding="utf-8") as fh:
                fh.write(text)
        return

    kb = load_kb_file(args.kb)
    if args.command == "retrieve":
        c = parse(args.concept, kb)
        names = Retriever(kb).retrieve(c)
        for x in kb.instances:
            if x in names:
                print(x)
        return

    problem, _, _ = load_problem_file(args.problem)
    problem.validate(kb)
    if args.command == "splits":
        if args.k_splits < 1:
            raise UsageError("--k-splits must be >= 1")
        table = calculate_splits(kb, problem, args.k_splits)
        _write(json.dumps(table.to_json(), indent=2) + "\n", args.out)
        return

    cfg = _config(args)
    workers = worker_count()
    if args.command == "learn":
        report = learn(kb, problem, cfg, workers=workers)
    else:
        if args.folds < 2:
            raise UsageError("--folds must be >= 2")
        report = cross_validate(kb, problem, cfg, folds=args.folds,
                                shuffle_seed=args.shuffle_seed, workers=workers)
    text = report.to_tsv() if args.format == "tsv" else report.dumps(timings=args.timings)
    _write(text, args.out)


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _run(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, KBError, ConceptSyntaxError, RoleKindError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"conceptevo: error: {msg}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
