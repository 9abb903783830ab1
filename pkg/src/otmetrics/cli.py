"""Command-line frontend.

Subcommands: validate (check an interchange file), score (one metric over a
ref/hyp pair of files), sweep (factor sweep driven by a grid JSON document).

Exit codes are stable API: 0 ok, 1 I/O, 2 schema, 3 numeric, 4 every sweep
cell failed, 64 usage. Every output artifact embeds the fully resolved
configuration and the tool version.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .embedding_io import validate_embedding_file
from .errors import GridError, OtmetricsError
from .harness import (
    EmbeddingStore,
    load_judgments,
    parse_grid,
    run_sweep,
    score_all_pairs,
)
from .idf import Disabled, ExternalCorpus, Original, SampledCorpus
from .metrics import (
    BaryConfig,
    BaryDistance,
    BertScoreConfig,
    BertScoreVariant,
    MoverConfig,
    MultiRefStrategy,
)
from .preprocess import (
    PowerMeans,
    PreprocessConfig,
    SingleLayer,
    SubwordStrategy,
    config_with_stopwords,
    load_stopword_list,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3
EXIT_SWEEP_FAILED = 4
EXIT_USAGE = 64

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # the same flags are accepted before and after the subcommand; the
    # after-subcommand copies use SUPPRESS so they never clobber earlier values
    kwargs = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--seed", type=int, **({"default": 0} if not suppress else kwargs))
    parser.add_argument("--threads", help="sweep-cell parallelism, integer or 'auto'",
                        **({"default": "1"} if not suppress else kwargs))
    parser.add_argument("--format", choices=("json", "csv"),
                        **({"default": "csv"} if not suppress else kwargs))


def _build_parser() -> _Parser:
    parser = _Parser(prog="otmetrics", description=__doc__)
    parser.add_argument("--version", action="version", version=f"otmetrics {__version__}")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate an embedding interchange file",
                           parents=[common])
    p_val.add_argument("embeddings", type=Path)

    p_score = sub.add_parser("score", help="score hypothesis segments against references",
                             parents=[common])
    p_score.add_argument("--refs", type=Path, required=True)
    p_score.add_argument("--hyps", type=Path, required=True)
    p_score.add_argument("--metric", choices=("mover", "bertscore", "bary"), required=True)
    p_score.add_argument("--n", type=int, default=1, help="n-gram order for mover (1 or 2)")
    p_score.add_argument("--bertscore-variant", choices=("p", "r", "f1"), default="f1")
    p_score.add_argument("--bary-distance", choices=("wasserstein", "sinkhorn"), default="wasserstein")
    p_score.add_argument("--bary-epsilon", type=float, default=0.01)
    p_score.add_argument("--bary-layers", type=int, default=5)
    p_score.add_argument("--layer", type=int, default=-1,
                         help="stored layer for single-layer aggregation (bertscore)")
    p_score.add_argument("--exponents", default="1",
                         help="comma-separated power-mean exponents (mover), 'inf'/'-inf' allowed")
    p_score.add_argument("--subword", choices=("first", "all", "ave-all"), default=None)
    p_score.add_argument("--remove-punct", action=argparse.BooleanOptionalAction, default=None)
    p_score.add_argument("--stopwords", type=Path, default=None)
    p_score.add_argument("--idf", choices=("ori", "dis"), default="ori")
    p_score.add_argument("--idf-sample", type=int, default=None, help="sample K segments for IDF")
    p_score.add_argument("--idf-external", type=Path, default=None)
    p_score.add_argument("--multi-ref", choices=("mean", "max"), default="mean")
    p_score.add_argument("--out", type=Path, required=True)

    p_sweep = sub.add_parser("sweep", help="run a sensitivity sweep from a grid file",
                             parents=[common])
    p_sweep.add_argument("--grid", type=Path, required=True)
    p_sweep.add_argument("--embeddings", type=Path, required=True)
    p_sweep.add_argument("--judgments", type=Path, required=True)
    p_sweep.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


def _cmd_validate(args) -> int:
    diags = validate_embedding_file(args.embeddings)
    config = {"command": "validate", "embeddings": str(args.embeddings), "version": __version__}
    print(json.dumps({"config": config, "diagnostics": [
        {"kind": d.kind, "message": d.message} for d in diags
    ], "ok": not diags}, sort_keys=True))
    if any(d.kind == "io" for d in diags):
        return EXIT_IO
    if any(d.kind == "schema" for d in diags):
        return EXIT_SCHEMA
    if any(d.kind == "numeric" for d in diags):
        return EXIT_NUMERIC
    return EXIT_OK


def _parse_exponents(text: str) -> tuple[float, ...]:
    out = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        out.append(float(piece))
    if not out:
        raise ValueError("at least one exponent required")
    return tuple(out)


def _score_config(args) -> tuple:
    if args.metric == "mover":
        metric = MoverConfig(n=args.n)
        layer_agg = PowerMeans(_parse_exponents(args.exponents))
        subword = args.subword or "first"
        remove_punct = True if args.remove_punct is None else args.remove_punct
    elif args.metric == "bertscore":
        metric = BertScoreConfig(variant=BertScoreVariant(args.bertscore_variant))
        layer_agg = SingleLayer(args.layer)
        subword = args.subword or "all"
        remove_punct = False if args.remove_punct is None else args.remove_punct
    else:
        metric = BaryConfig(
            distance=BaryDistance(args.bary_distance),
            epsilon=args.bary_epsilon,
            n_layers_used=args.bary_layers,
        )
        layer_agg = SingleLayer(-1)  # bypassed by the per-layer path
        subword = args.subword or "all"
        remove_punct = False if args.remove_punct is None else args.remove_punct
    prep = PreprocessConfig(
        remove_punct=remove_punct,
        subword=SubwordStrategy(subword),
        layer_agg=layer_agg,
    )
    if args.stopwords is not None:
        prep = config_with_stopwords(prep, load_stopword_list(args.stopwords), str(args.stopwords))
    if args.idf_external is not None:
        idf_mode = ExternalCorpus(str(args.idf_external))
    elif args.idf_sample is not None:
        idf_mode = SampledCorpus(k=args.idf_sample, seed=args.seed)
    elif args.idf == "dis":
        idf_mode = Disabled()
    else:
        idf_mode = Original()
    return metric, prep, idf_mode


def _resolved_score_config(args, metric, prep, idf_mode) -> dict:
    return {
        "command": "score",
        "version": __version__,
        "seed": args.seed,
        "refs": str(args.refs),
        "hyps": str(args.hyps),
        "metric": metric.label,
        "idf": type(idf_mode).__name__.lower(),
        "multi_ref": args.multi_ref,
        "prep": {
            "subword": prep.subword.value,
            "remove_punct": prep.remove_punct,
            "stopword_list_id": prep.stopword_list_id,
            "layer_agg": repr(prep.layer_agg),
        },
    }


def _cmd_score(args) -> int:
    if args.metric == "mover" and args.n not in (1, 2):
        raise UsageError("--n must be 1 or 2")
    metric, prep, idf_mode = _score_config(args)
    if Path(args.refs).resolve() == Path(args.hyps).resolve():
        store = EmbeddingStore.from_file(args.refs)
    else:
        store = EmbeddingStore.merge(args.refs, args.hyps)
    run = score_all_pairs(store, metric, prep, idf_mode, MultiRefStrategy(args.multi_ref))
    config = _resolved_score_config(args, metric, prep, idf_mode)

    rows = [
        {
            "segment_id": p.segment_id,
            "system_id": p.system_id,
            "metric": p.metric_label,
            "score": p.score,
            "raw_distance": p.raw_distance,
            "skip_reason": "",
        }
        for p in run.pairs
    ] + [
        {
            "segment_id": s.segment_id,
            "system_id": s.system_id,
            "metric": metric.label,
            "score": None,
            "raw_distance": None,
            "skip_reason": s.reason,
        }
        for s in run.skips
    ]
    rows.sort(key=lambda r: (r["segment_id"], r["system_id"]))

    args.out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        args.out.write_text(
            json.dumps({"config": config, "rows": rows}, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("# " + json.dumps(config, sort_keys=True) + "\n")
            writer = csv.DictWriter(
                fh, fieldnames=["segment_id", "system_id", "metric", "score", "raw_distance", "skip_reason"]
            )
            writer.writeheader()
            for row in rows:
                writer.writerow(
                    {k: ("" if v is None else (repr(v) if isinstance(v, float) else v)) for k, v in row.items()}
                )
    return EXIT_OK


def _factor_csv(report, factor: str, metrics: list[str], path: Path, config_line: str) -> None:
    settings: list[str] = []
    for metric in metrics:
        for stat_report in report.factors[metric][factor].values():
            for label in stat_report["settings"]:
                if label not in settings:
                    settings.append(label)
    columns = []
    for metric in metrics:
        for stat in report.statistic_names:
            columns.append(f"{metric}:{stat}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(config_line)
        writer = csv.writer(fh)
        writer.writerow(["setting"] + columns)
        for label in settings:
            row = [label]
            for metric in metrics:
                for stat in report.statistic_names:
                    value = report.factors[metric][factor][stat]["settings"].get(label)
                    row.append("" if value is None else repr(value))
            writer.writerow(row)
        for summary in ("range", "cv"):
            row = [summary]
            for metric in metrics:
                for stat in report.statistic_names:
                    value = report.factors[metric][factor][stat][summary]
                    row.append("" if value is None else repr(value))
            writer.writerow(row)


def _rd_csv(report, metrics: list[str], path: Path, config_line: str) -> None:
    names = ["rd_dis_ori", "ad_dis_ori", "rd_dis_pr", "ad_dis_pr", "rd_rand_dis", "rd_rand_ori"]
    columns = [f"{m}:{s}" for m in metrics for s in report.statistic_names]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(config_line)
        writer = csv.writer(fh)
        writer.writerow(["comparison"] + columns)
        for name in names:
            row = [name]
            for metric in metrics:
                for stat in report.statistic_names:
                    value = report.comparisons[metric][stat].get(name)
                    if value is None:
                        row.append("")
                    elif isinstance(value, list):
                        row.append(";".join(repr(v) for v in value))
                    else:
                        row.append(repr(value))
            writer.writerow(row)


def _cmd_sweep(args, threads: int) -> int:
    try:
        grid_obj = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        print(f"grid file is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    grid, schema = parse_grid(grid_obj, base_dir=Path(args.grid).parent)
    if "seed" not in grid_obj:
        grid = dataclasses.replace(grid, seed=args.seed)
    store = EmbeddingStore.from_file(args.embeddings)
    judgments = load_judgments(args.judgments, schema, lang_pair=grid_obj.get("lang_pair", ""))
    report = run_sweep(grid, store, judgments, threads=threads)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": __version__,
        "config": {
            "grid": str(args.grid),
            "embeddings": str(args.embeddings),
            "judgments": str(args.judgments),
            "seed": grid.seed,
            "level": grid.level.value,
            "multi_ref": grid.multi_ref.value,
            "metrics": [m.label for m in grid.metrics],
            "stopword_settings": [label for label, _ in grid.stopword_settings],
            "idf_settings": [label for label, _ in grid.idf_settings],
            "subword_punct_settings": [
                f"{s.value}{'+pr' if pr else ''}" for s, pr in grid.subword_punct_settings
            ],
        },
        "report": report.to_json_dict(),
    }
    (out_dir / "report.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    metrics = [m.label for m in grid.metrics]
    config_line = "# " + json.dumps(
        {"version": __version__, **payload["config"]}, sort_keys=True
    ) + "\n"
    _factor_csv(report, "stopwords", metrics, out_dir / "cv_stop.csv", config_line)
    _factor_csv(report, "idf", metrics, out_dir / "cv_idf.csv", config_line)
    _factor_csv(report, "subword_punct", metrics, out_dir / "cv_sub.csv", config_line)
    _rd_csv(report, metrics, out_dir / "rd.csv", config_line)

    succeeded = sum(1 for c in report.cells.values() if c.error is None)
    print(f"sweep: {succeeded}/{len(report.cells)} cells ok, report in {out_dir}")
    return EXIT_OK if succeeded else EXIT_SWEEP_FAILED


class UsageError(Exception):
    pass


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("OTMETRICS_LOG", "WARNING").upper())
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.threads == "auto":
        threads = os.cpu_count() or 1
    else:
        try:
            threads = int(args.threads)
        except ValueError:
            parser.error("--threads must be an integer or 'auto'")
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "score":
            return _cmd_score(args)
        return _cmd_sweep(args, threads)
    except UsageError as exc:
        parser.error(str(exc))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GridError as exc:
        print(f"grid error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OtmetricsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
