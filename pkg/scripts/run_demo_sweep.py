#!/usr/bin/env python3
"""Run the full pipeline on the bundled synthetic corpus.

Validates the embedding file, scores one metric, runs the demo sweep, and
prints the headline sensitivity numbers.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from otmetrics import cli

BUNDLE = Path(__file__).resolve().parents[1] / "data" / "synthetic"


def main() -> int:
    out_dir = Path(tempfile.mkdtemp(prefix="otmetrics-demo-"))
    steps = [
        ["validate", str(BUNDLE / "embeddings.jsonl")],
        [
            "score",
            "--refs", str(BUNDLE / "embeddings.jsonl"),
            "--hyps", str(BUNDLE / "embeddings.jsonl"),
            "--metric", "mover", "--n", "1",
            "--out", str(out_dir / "scores.csv"),
        ],
        [
            "sweep",
            "--grid", str(BUNDLE / "grid.json"),
            "--embeddings", str(BUNDLE / "embeddings.jsonl"),
            "--judgments", str(BUNDLE / "judgments_da.csv"),
            "--out", str(out_dir / "sweep"),
            "--threads", "4",
        ],
    ]
    for argv in steps:
        code = cli.main(argv)
        if code != 0:
            print(f"step {argv[0]} failed with exit code {code}", file=sys.stderr)
            return code

    report = json.loads((out_dir / "sweep" / "report.json").read_text())["report"]
    stat = report["statistics"][0]
    print(f"\nsensitivity summary ({stat}, {report['level']} level):")
    for metric, factors in report["factors"].items():
        parts = []
        for factor in ("stopwords", "idf", "subword_punct"):
            cv = factors[factor][stat]["cv"]
            parts.append(f"{factor} cv={cv:.2f}%" if cv is not None else f"{factor} cv=n/a")
        print(f"  {metric}: " + ", ".join(parts))
    print(f"\nartifacts in {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
