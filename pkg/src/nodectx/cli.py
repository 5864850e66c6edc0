"""Command-line pipeline: synth -> build -> decompose -> rank / eval.

Every stage reads and writes files in one working directory (``--out``), so
stages can be rerun independently. Flag defaults can be overridden through
``NODECTX_<FLAG>`` environment variables (for example ``NODECTX_SEED=3`` or
``NODECTX_RANKS=2,4``); explicit flags win over the environment.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from nodectx.errors import NodeCtxError
from nodectx.greedy_parafac import DecomposeOptions, decompose, fit_error, load_model, save_model
from nodectx.network_builder import (
    build_adjacency_tensor,
    filter_vocabulary,
    generate_synthetic_network,
    load_characteristic_matrix,
    load_stoplist,
    write_characteristic_matrix,
)
from nodectx.ranking_query import evaluate_all_tasks, group_listing
from nodectx.sparse_tensor3 import read_tensor, write_tensor

logger = logging.getLogger("nodectx")

ENV_PREFIX = "NODECTX_"
MATRIX_FILE = "matrix.csv"
TENSOR_FILE = "tensor.txt"
MODELS_DIR = "models"
TIMING_FILE = "timing.json"
LISTINGS_DIR = "listings"
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
SYNTH_FILE = "synthetic.csv"


def _env(name: str, default):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} is not positive")
    return value


def _ranks(text: str) -> list[int]:
    try:
        ranks = [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed rank list {text!r}") from None
    if not ranks or ranks[0] < 1 or any(b <= a for a, b in zip(ranks, ranks[1:])):
        raise argparse.ArgumentTypeError(
            f"ranks must be strictly increasing positive integers, got {text!r}"
        )
    return ranks


def model_path(out: Path, rank: int) -> Path:
    return out / MODELS_DIR / f"model_R{rank:02d}.json"


def _model_files(out: Path) -> list[Path]:
    return sorted((out / MODELS_DIR).glob("model_R*.json"))


def cmd_synth(args) -> int:
    C = generate_synthetic_network(
        args.n_blogs,
        args.n_words,
        args.clusters,
        seed=args.seed,
        noise=args.noise,
        size_skew=args.size_skew,
        word_skew=args.word_skew,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / SYNTH_FILE
    write_characteristic_matrix(C, path)
    print(f"wrote {path}: N={C.n_blogs} M={C.n_words}")
    return 0


def cmd_build(args) -> int:
    if args.input is None:
        raise NodeCtxError("--input is required")
    C = load_characteristic_matrix(args.input)
    stop = load_stoplist(args.stoplist) if args.stoplist else None
    C = filter_vocabulary(C, stop, args.min_blogs)
    X = build_adjacency_tensor(C)
    args.out.mkdir(parents=True, exist_ok=True)
    write_characteristic_matrix(C, args.out / MATRIX_FILE)
    write_tensor(X, args.out / TENSOR_FILE)
    print(f"N={C.n_blogs} M={C.n_words} nnz={X.nnz}")
    return 0


def cmd_decompose(args) -> int:
    X = read_tensor(args.out / TENSOR_FILE)
    (args.out / MODELS_DIR).mkdir(parents=True, exist_ok=True)
    timing = {}
    for R in args.ranks:
        opts = DecomposeOptions(
            rank=R, tol=args.tol, max_iters=args.max_iters, seed=args.seed, init=args.init
        )
        start = time.perf_counter()
        model = decompose(X, opts)
        timing[str(R)] = time.perf_counter() - start
        save_model(model, model_path(args.out, R))
        notes = [
            f"group {r + 1} {st}" for r, st in enumerate(model.status) if st != "converged"
        ]
        print(
            f"R={R} fit_error={fit_error(X, model):.6f} "
            f"lambda_1={model.weights[0]:.6g} time={timing[str(R)]:.2f}s"
            + (f" note: {', '.join(notes)}" if notes else "")
        )
    # timings live apart from the models so model files stay reproducible
    with open(args.out / MODELS_DIR / TIMING_FILE, "w", encoding="utf-8") as fh:
        json.dump(timing, fh, indent=1)
        fh.write("\n")
    return 0


def cmd_rank(args) -> int:
    C = load_characteristic_matrix(args.out / MATRIX_FILE)
    path = model_path(args.out, args.rank)
    if not path.exists():
        raise NodeCtxError(f"no model for R={args.rank} at {path}")
    model = load_model(path)
    groups = [args.group] if args.group else range(1, model.rank + 1)
    if args.group and args.group > model.rank:
        raise NodeCtxError(f"group {args.group} out of range 1..{model.rank}")
    listings = [
        group_listing(model, C.blog_labels, C.word_labels, r, args.top_k) for r in groups
    ]
    text = "".join(f"Group {l.group}\n{l.format_text()}\n" for l in listings)
    dest = args.out / LISTINGS_DIR
    dest.mkdir(parents=True, exist_ok=True)
    stem = f"R{args.rank:02d}" + (f"_g{args.group}" if args.group else "")
    (dest / f"{stem}.txt").write_text(text, encoding="utf-8")
    with open(dest / f"{stem}.json", "w", encoding="utf-8") as fh:
        json.dump([l.to_dict() for l in listings], fh, indent=1)
        fh.write("\n")
    sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    C = load_characteristic_matrix(args.out / MATRIX_FILE)
    files = _model_files(args.out)
    if not files:
        raise NodeCtxError(f"no models found in {args.out / MODELS_DIR}")
    models = sorted((load_model(p) for p in files), key=lambda m: m.rank)
    report = evaluate_all_tasks(C, models, weighted=args.weighted)
    (args.out / REPORT_CSV).write_text(report.to_csv(), encoding="utf-8")
    (args.out / REPORT_JSON).write_text(report.to_json(), encoding="utf-8")
    sys.stdout.write(report.format_text())
    return 0


def cmd_run(args) -> int:
    for step in (cmd_build, cmd_decompose, cmd_eval):
        code = step(args)
        if code:
            return code
    return 0


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    if "out" in names:
        p.add_argument("--out", type=Path, default=Path(_env("out", "nodectx-out")),
                       help="working directory for all pipeline files")
    if "input" in names:
        p.add_argument("--input", type=Path, default=_env("input", None),
                       help="characteristic matrix CSV (header = words, first column = blogs)")
        p.add_argument("--stoplist", type=Path, default=_env("stoplist", None),
                       help="one word per line, '#' starts a comment")
        p.add_argument("--min-blogs", type=_positive_int, default=_env("min_blogs", "2"),
                       help="drop words used by fewer blogs (default 2)")
    if "decompose" in names:
        p.add_argument("--ranks", type=_ranks, default=_env("ranks", "2,4,6,8,10,12,14"),
                       help="comma-separated group counts, strictly increasing")
        p.add_argument("--tol", type=float, default=float(_env("tol", 1e-9)))
        p.add_argument("--max-iters", type=_positive_int, default=_env("max_iters", "500"))
        p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
        p.add_argument("--init", choices=("slice-sum", "random"), default=_env("init", "slice-sum"))
    if "eval" in names:
        p.add_argument("--weighted", action="store_true",
                       help="weight each group by lambda in the decomposition rankings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodectx",
        description="Cluster blogs and shared words with greedy PARAFAC.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted-partition characteristic matrix")
    _add_common(p, "out")
    p.add_argument("--n-blogs", type=_positive_int, default=_env("n_blogs", "151"))
    p.add_argument("--n-words", type=_positive_int, default=_env("n_words", "180"))
    p.add_argument("--clusters", type=_positive_int, default=_env("clusters", "4"))
    p.add_argument("--noise", type=float, default=float(_env("noise", 0.05)))
    p.add_argument("--size-skew", type=float, default=float(_env("size_skew", 1.0)))
    p.add_argument("--word-skew", type=float, default=float(_env("word_skew", 0.5)))
    p.add_argument("--seed", type=int, default=int(_env("seed", 1)))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="filter the vocabulary and build the adjacency tensor")
    _add_common(p, "out", "input")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("decompose", help="greedy PARAFAC, one model file per rank")
    _add_common(p, "out", "decompose")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("rank", help="ranked blogs and words per group")
    _add_common(p, "out")
    p.add_argument("--rank", type=_positive_int, required=True, help="model to list (R)")
    p.add_argument("--group", type=_positive_int, default=None, help="single group r (default: all)")
    p.add_argument("--top-k", type=_positive_int, default=_env("top_k", "10"))
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="cosine similarity of the four query tasks")
    _add_common(p, "out", "eval")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="build, decompose and eval in one go")
    _add_common(p, "out", "input", "decompose", "eval")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (NodeCtxError, ValueError, OSError) as exc:
        print(f"nodectx {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
