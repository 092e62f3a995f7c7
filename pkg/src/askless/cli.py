"""Command-line entry point: generate, learn, find-k, evaluate, predict, serve.

Exit codes: 0 success, 1 usage error, 2 data/model error. Diagnostics go to
stderr; results go to files or stdout. Every command that takes ``--seed``
falls back to the ASKLESS_SEED environment variable and is byte-for-byte
reproducible for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bn import load_network, save_network
from .data import (
    default_generator_config,
    generate_synthetic,
    load_generator_config,
    read_csv,
    split_indices,
    write_csv,
)
from .errors import AsklessError
from .inference import DEFAULT_SAMPLES, EXACT, LIKELIHOOD_WEIGHTING, query
from .learning import AIC, BIC, HillClimbConfig, fit_mle, hill_climb
from .metrics import evaluate
from .reduction import (
    MODE_BEST,
    MODE_THRESHOLD,
    FindKConfig,
    find_k,
    random_subset,
)
from .schema import default_schema, load_schema

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the CLI contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _seed_value(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ASKLESS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise AsklessError(f"ASKLESS_SEED is not an integer: {env!r}") from None
    return 0


def _load_schema_arg(value: str):
    if value == "default":
        return default_schema()
    return load_schema(value)


def _grid(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected e.g. 5,10,20")
    if not values:
        raise argparse.ArgumentTypeError("grid must not be empty")
    return values


def _info(args, message):
    if not args.quiet:
        print(message, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="askless", description=__doc__)
    parser.add_argument("--version", action="version", version=f"askless {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (fallback: ASKLESS_SEED, then 0)")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")

    p = sub.add_parser("generate", help="write synthetic labeled survey responses")
    p.add_argument("--schema", default="default", help="'default' or a schema JSON path")
    p.add_argument("--config", default=None, help="generator config JSON (default: bundled)")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    common(p)

    p = sub.add_parser("learn", help="learn structure and CPTs from a response CSV")
    p.add_argument("--data", required=True, help="training CSV with labels")
    p.add_argument("--schema", default="default")
    p.add_argument("--score", choices=(AIC, BIC), default=AIC)
    p.add_argument("--max-parents", type=int, default=4)
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.0, help="CPT smoothing")
    p.add_argument("--split", type=float, default=None,
                   help="train on this fraction; write the row partition next to --out")
    p.add_argument("--out", required=True, help="output network JSON path")
    common(p)

    p = sub.add_parser("find-k", help="line-search the number of questions")
    p.add_argument("--net", required=True, help="network JSON path")
    p.add_argument("--test", required=True, help="labeled test CSV")
    p.add_argument("--schema", default="default")
    p.add_argument("--grid", type=_grid, default=(5, 10, 15, 20))
    p.add_argument("--threshold", type=float, default=0.70)
    p.add_argument("--mode", choices=(MODE_THRESHOLD, MODE_BEST), default=MODE_THRESHOLD)
    p.add_argument("--engine", choices=(EXACT, LIKELIHOOD_WEIGHTING),
                   default=LIKELIHOOD_WEIGHTING)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                   help="samples per query for the lw engine")
    p.add_argument("--out", default=None, help="report JSON path (default: stdout only)")
    common(p)

    p = sub.add_parser("evaluate", help="score predictions on a labeled CSV")
    p.add_argument("--net", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--schema", default="default")
    p.add_argument("--k", type=int, default=None,
                   help="ask k random questions per row (default: all asked)")
    p.add_argument("--engine", choices=(EXACT, LIKELIHOOD_WEIGHTING), default=EXACT)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--out", default=None, help="report JSON path")
    common(p)

    p = sub.add_parser("predict", help="predict the segment for one evidence file")
    p.add_argument("--net", required=True)
    p.add_argument("--evidence", required=True,
                   help="JSON file mapping question abbr to answer level")
    p.add_argument("--engine", choices=(EXACT, LIKELIHOOD_WEIGHTING), default=EXACT)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--posterior", action="store_true",
                   help="print the full posterior JSON instead of just the level")
    common(p)

    p = sub.add_parser("serve", help="run the live survey session service")
    p.add_argument("--net", required=True)
    p.add_argument("--k", type=int, default=10, help="questions per session")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--engine", choices=(EXACT, LIKELIHOOD_WEIGHTING), default=EXACT)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--ttl-hours", type=float, default=24.0)
    common(p)

    return parser


def _cmd_generate(args) -> int:
    schema = _load_schema_arg(args.schema)
    config = (
        load_generator_config(args.config) if args.config else default_generator_config()
    )
    config = replace(config, rows=args.rows, seed=_seed_value(args))
    dataset = generate_synthetic(schema, config)
    write_csv(dataset, args.out)
    _info(args, f"wrote {len(dataset)} rows to {args.out}")
    return 0


def _cmd_learn(args) -> int:
    schema = _load_schema_arg(args.schema)
    dataset = read_csv(args.data, schema, require_label=True)
    seed = _seed_value(args)
    if args.split is not None:
        if not 0.0 < args.split < 1.0:
            raise AsklessError(f"--split must be in (0, 1), got {args.split}")
        train_idx, tune_idx = split_indices(len(dataset), args.split, seed)
        partition_path = Path(args.out).with_suffix(".split.json")
        partition_path.write_text(
            json.dumps({"seed": seed, "fraction": args.split,
                        "train": train_idx, "tune": tune_idx}) + "\n"
        )
        _info(args, f"wrote split ({len(train_idx)}/{len(tune_idx)}) to {partition_path}")
        dataset = dataset.subset(train_idx)
    config = HillClimbConfig(
        criterion=args.score,
        max_parents=args.max_parents,
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        seed=seed,
    )
    dag = hill_climb(dataset, config)
    bn = fit_mle(dag, dataset, args.alpha)
    save_network(bn, args.out)
    _info(args, f"learned {len(dag.edges)} edges from {len(dataset)} rows -> {args.out}")
    return 0


def _cmd_find_k(args) -> int:
    bn = load_network(args.net)
    test = read_csv(args.test, bn.schema, require_label=True)
    config = FindKConfig(
        grid=args.grid,
        threshold=args.threshold,
        mode=args.mode,
        engine=args.engine,
        n_samples=args.samples,
        seed=_seed_value(args),
    )
    report = find_k(bn, test, config)
    print(report.render_tables())
    if args.out:
        report.save(args.out)
        _info(args, f"wrote report to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    bn = load_network(args.net)
    test = read_csv(args.test, bn.schema, require_label=True)
    label_var = bn.schema.label_var
    pool = bn.schema.asked
    seed = _seed_value(args)
    predictions = []
    for i in range(len(test)):
        row = test.row(i)
        if args.k is None:
            questions = pool
            child_seed = seed + i
        else:
            seq = np.random.SeedSequence([seed, args.k, i])
            questions = random_subset(pool, args.k, np.random.default_rng(seq))
            child_seed = int(seq.generate_state(1)[0])
        evidence = {q: row[q] for q in questions}
        post = query(bn, label_var, evidence, engine=args.engine,
                     n_samples=args.samples, seed=child_seed)
        predictions.append(post.argmax())
    report = evaluate(predictions, test.column(label_var), bn.schema.levels(label_var))
    title = f"k={args.k}" if args.k is not None else "full questionnaire"
    print(report.render_table(title=f"Accuracy metrics for {title}"))
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_doc(), indent=1) + "\n")
        _info(args, f"wrote report to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    bn = load_network(args.net)
    try:
        evidence = json.loads(Path(args.evidence).read_text())
    except json.JSONDecodeError as exc:
        raise AsklessError(f"{args.evidence}: not valid JSON ({exc})") from exc
    if not isinstance(evidence, dict):
        raise AsklessError(f"{args.evidence}: expected a JSON object")
    post = query(bn, bn.schema.label_var, evidence, engine=args.engine,
                 n_samples=args.samples, seed=_seed_value(args))
    if args.posterior:
        print(json.dumps(post.to_doc(), indent=1))
    else:
        print(post.argmax())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    bn = load_network(args.net)
    app = create_app(
        bn,
        default_k=args.k,
        engine=args.engine,
        n_samples=args.samples,
        ttl_hours=args.ttl_hours,
        seed=args.seed,
    )
    _info(args, f"serving on {args.host}:{args.port} (k={args.k}, engine={args.engine})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "learn": _cmd_learn,
    "find-k": _cmd_find_k,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "serve": _cmd_serve,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except AsklessError as exc:
        print(f"askless {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR
    except FileNotFoundError as exc:
        print(f"askless {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
