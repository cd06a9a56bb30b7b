"""Command-line entry point: ``embreduce {analyze,evaluate,sweep,transform,generate}``.

Exit status is 0 on success, 1 for usage, validation and parse errors and 2
for numerical failures.  Output files are written only once every result
has been computed, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .classifier import ProbeConfig
from .data import (
    CsvSchema,
    GeneratorConfig,
    embedding_column_indices,
    format_float,
    generate,
    load_csv,
    parse_embedding,
    read_rows,
    write_csv,
)
from .errors import EmbReduceError, InvalidParameter, NumericalFailure
from .evaluation import (
    cross_validate,
    diagnostics_report,
    reports_to_csv,
    reports_to_json,
    score_predictions,
    sweep,
)
from .transforms import (
    PARAM_KEYS,
    check_params,
    fit_method,
    load_model,
    mean_norm_ratio,
    model_to_dict,
    valid_block_counts,
)

GRID_HELP = """\
grid syntax: NAME=START..END:STEP (inclusive), NAME=V1,V2,... or nb=divisors.
NAME is d, delta or nb.  Examples: d=0..20:2  delta=0.0..1.0:0.05  nb=divisors
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _commit(files: dict[Path, str]) -> None:
    """Write every file via a temporary sibling, then move them all into place."""
    staged = []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _stem(path: str) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".csv", ".json") else p


def _schema(args) -> CsvSchema:
    cats = args.schema_categorical.split(",") if args.schema_categorical else None
    nums = args.schema_numeric.split(",") if args.schema_numeric else None
    if cats is not None or nums is not None:
        cats, nums = cats or [], nums or []
    return CsvSchema(
        embedding_prefix=args.schema_embedding_prefix,
        label_column=args.schema_label,
        categorical_columns=cats,
        numeric_columns=nums,
    )


def _mode(args) -> str:
    return args.mode.replace("-", "_")


def _probe(args) -> ProbeConfig:
    return ProbeConfig(l2=args.l2, max_iter=args.max_iter, tol=args.tol)


def _fixed_params(args, method: str) -> dict:
    given = {"d": args.d, "delta": args.delta, "nb": args.nb}
    return {key: given[key] for key in PARAM_KEYS[method] if given[key] is not None}


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_grid(text: str, p: int, n_classes: int) -> tuple[str, list]:
    """Expand a grid expression into ``(name, values)``."""
    if "=" not in text:
        raise InvalidParameter(f"grid expression {text!r} lacks NAME=")
    name, body = (part.strip() for part in text.split("=", 1))
    if name not in ("d", "delta", "nb"):
        raise InvalidParameter(f"grid parameter must be d, delta or nb, got {name!r}")
    if body == "divisors":
        if name != "nb":
            raise InvalidParameter("the divisors keyword only applies to nb")
        return name, valid_block_counts(p, n_classes)
    try:
        if ".." in body:
            rng, _, step_text = body.partition(":")
            start_text, end_text = rng.split("..", 1)
            start, end = _number(start_text), _number(end_text)
            step = _number(step_text) if step_text else 1
            if step <= 0 or end < start:
                raise InvalidParameter(f"grid range {body!r} must have END >= START and STEP > 0")
            count = int(np.floor((end - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
            if all(isinstance(v, int) for v in (start, end, step)):
                values = [int(v) for v in values]
            else:
                values = [round(float(v), 12) for v in values]
        else:
            values = [_number(v) for v in body.split(",") if v.strip()]
    except ValueError:
        raise InvalidParameter(f"cannot parse grid {text!r}") from None
    if name in ("d", "nb"):
        if any(float(v) != int(v) for v in values):
            raise InvalidParameter(f"grid values for {name} must be integers")
        values = [int(v) for v in values]
    else:
        values = [float(v) for v in values]
    return name, values


# ---------------------------------------------------------------- subcommands


def cmd_analyze(args) -> int:
    dataset = load_csv(args.input, _schema(args))
    report = diagnostics_report(dataset, d_remove=args.d if args.d is not None else 10)
    before, after = report["evr_curve"], report["evr_curve_after_ppa"]
    lines = ["component,evr,evr_after_ppa"]
    lines += [f"{i},{format_float(b)},{format_float(a)}" for i, (b, a) in enumerate(zip(before, after))]
    out = Path(args.output)
    evr_path = _stem(args.output).with_name(_stem(args.output).name + "_evr.csv")
    _commit({out: json.dumps(report, indent=2) + "\n", evr_path: "\n".join(lines) + "\n"})
    print(f"R={report['R']:.4f} n={report['n']} p={report['p']} K={report['K']} -> {out}, {evr_path}")
    return 0


def cmd_evaluate(args) -> int:
    dataset = load_csv(args.input, _schema(args))
    params = _fixed_params(args, args.method)
    report = cross_validate(dataset, args.method, params, _probe(args), _mode(args), args.seed, args.k_folds)
    stem = _stem(args.output)
    _commit({stem.with_suffix(".csv"): reports_to_csv([report]), stem.with_suffix(".json"): reports_to_json(report)})
    print(report.summary())
    if args.predictions:
        print(f"external predictions accuracy {score_predictions(dataset, args.predictions, args.prediction_column):.4f}")
    return 0


def cmd_sweep(args) -> int:
    dataset = load_csv(args.input, _schema(args))
    name, values = parse_grid(args.grid, dataset.p, dataset.n_classes)
    if name not in PARAM_KEYS[args.method]:
        raise InvalidParameter(f"method {args.method!r} has no parameter {name!r}")
    fixed = _fixed_params(args, args.method)
    grid = [{**fixed, name: v} for v in values]
    reports = sweep(
        dataset,
        args.method,
        grid,
        _probe(args),
        _mode(args),
        args.seed,
        parallelism=args.parallelism,
        k=args.k_folds,
        skip_failures=args.skip_failures,
    )
    _commit({Path(args.output): reports_to_csv(reports)})
    for r in reports:
        print(r.summary())
    return 0


def cmd_transform(args) -> int:
    prefix = args.schema_embedding_prefix
    header, rows = read_rows(args.input)
    X = parse_embedding(header, rows, prefix)
    if args.model:
        model = load_model(args.model)
    else:
        if not args.method or args.method == "raw":
            raise InvalidParameter("transform needs --model or --method ppa|pca|lda|plda")
        if args.method in ("lda", "plda"):
            dataset = load_csv(args.input, _schema(args))
            X, y, K = dataset.embedding, dataset.labels, dataset.n_classes
        else:
            y, K = None, 0
        params = check_params(args.method, _fixed_params(args, args.method), X.shape[1], K)
        model = fit_method(args.method, X, y, params)
    reduced = model.transform(X)

    emb_pos = embedding_column_indices(header, prefix)
    first, skip = min(emb_pos), set(emb_pos)
    red_names = [f"red_{j}" for j in range(reduced.shape[1])]

    def assemble(cells, reduced_cells):
        out = []
        for pos, cell in enumerate(cells):
            if pos == first:
                out.extend(reduced_cells)
            if pos not in skip:
                out.append(cell)
        return out

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(assemble(header, red_names))
    for row, values in zip(rows, reduced):
        writer.writerow(assemble(row, [format_float(v) for v in values]))
    files = {Path(args.output): buf.getvalue()}
    model_out = Path(args.model_output) if args.model_output else _stem(args.output).with_suffix(".model.json")
    files[model_out] = json.dumps(model_to_dict(model)) + "\n"
    _commit(files)
    print(f"{model.method}: {X.shape[1]} -> {reduced.shape[1]} columns; model saved to {model_out}")
    return 0


def cmd_generate(args) -> int:
    config = GeneratorConfig.from_json(args.config) if args.config else GeneratorConfig()
    if args.seed is not None:
        config = GeneratorConfig.from_dict({**config.to_dict(), "seed": args.seed})
    dataset = generate(config)
    with tempfile.TemporaryDirectory() as tmp:
        staging = Path(tmp) / "data.csv"
        write_csv(dataset, staging)
        text = staging.read_text(encoding="utf-8")
    _commit({Path(args.output): text})
    R = mean_norm_ratio(dataset.embedding)
    print(f"n={dataset.n} p={dataset.p} K={dataset.n_classes} R={R:.4f} -> {args.output}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="embreduce", description="Linear reducers for embedding features in tabular classification.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    data_opts = _Parser(add_help=False)
    data_opts.add_argument("--input", required=True, help="dataset CSV")
    data_opts.add_argument("--output", required=True)
    data_opts.add_argument("--schema-embedding-prefix", default="emb_")
    data_opts.add_argument("--schema-label", default="label")
    data_opts.add_argument("--schema-categorical", help="comma-separated categorical columns")
    data_opts.add_argument("--schema-numeric", help="comma-separated numeric columns")

    method_opts = _Parser(add_help=False)
    method_opts.add_argument("--d", type=int, help="PPA: directions removed; PCA: components kept")
    method_opts.add_argument("--delta", type=float, help="LDA shrinkage in [0, 1]")
    method_opts.add_argument("--nb", type=int, help="Partitioned-LDA block count")

    eval_opts = _Parser(add_help=False)
    eval_opts.add_argument("--method", required=True, choices=["raw", "ppa", "pca", "lda", "plda"])
    eval_opts.add_argument("--mode", default="embeddings-only", choices=["embeddings-only", "full-features"])
    eval_opts.add_argument("--k-folds", type=int, default=5)
    eval_opts.add_argument("--seed", type=int, default=42)
    eval_opts.add_argument("--l2", type=float, default=1.0, help="probe L2 penalty")
    eval_opts.add_argument("--max-iter", type=int, default=500)
    eval_opts.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("analyze", parents=[data_opts], help="mean-norm ratio and explained-variance curves")
    p.add_argument("--d", type=int, default=10, help="directions removed for the post-PPA curve")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evaluate", parents=[data_opts, method_opts, eval_opts], help="stratified CV of one configuration")
    p.add_argument("--predictions", help="CSV of external predictions to score alongside")
    p.add_argument("--prediction-column", default="prediction")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "sweep",
        parents=[data_opts, method_opts, eval_opts],
        help="CV over a parameter grid",
        epilog=GRID_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--grid", required=True, help="e.g. d=0..20:2, delta=0.0..1.0:0.05, nb=divisors")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--skip-failures", action="store_true", help="record numerically failing grid points instead of aborting")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("transform", parents=[data_opts, method_opts], help="replace the embedding block with reduced columns")
    p.add_argument("--model", help="saved model JSON to apply")
    p.add_argument("--method", choices=["ppa", "pca", "lda", "plda"], help="fit this method instead of loading a model")
    p.add_argument("--model-output", help="where to save the model (default: OUTPUT stem + .model.json)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--config", help="GeneratorConfig JSON (defaults when omitted)")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"embreduce: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (EmbReduceError, OSError) as exc:
        print(f"embreduce: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
