"""Command-line frontend for the extractor.

Input is a CSV/TSV file with a header row; columns are bound by name:
segment_id, role, system_id, text (system_id may be empty for references).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .extract import ExtractorConfig, ModelLoadError, SequenceTooLong, TextItem, extract


def _read_texts(path: Path) -> list[TextItem]:
    delimiter = "\t" if path.suffix.lower() == ".tsv" else ","
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        needed = {"segment_id", "role", "system_id", "text"}
        missing = needed - set(reader.fieldnames or [])
        if missing:
            raise SystemExit(f"input misses column(s): {', '.join(sorted(missing))}")
        return [
            TextItem(
                segment_id=row["segment_id"],
                role=row["role"],
                system_id=row["system_id"] or None,
                text=row["text"],
            )
            for row in reader
        ]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="embed-extract", description=__doc__)
    parser.add_argument("--model", required=True, help="model name or local path")
    parser.add_argument("--input", type=Path, required=True, help="CSV/TSV of texts")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--layers", default="-5,-4,-3,-2,-1",
                        help="comma-separated hidden-state indices, negative = from the end; "
                             "use the --layers=-2,-1 form for leading minus signs")
    parser.add_argument("--lowercase", action="store_true")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-len", type=int, default=None,
                        help="truncate to this many pieces; without it, over-long input is an error")
    parser.add_argument("--lang", default="")
    args = parser.parse_args(argv)

    cfg = ExtractorConfig(
        model_id=args.model,
        layers=tuple(int(x) for x in args.layers.split(",") if x.strip()),
        lowercase=args.lowercase,
        batch_size=args.batch_size,
        device=args.device,
        max_len=args.max_len,
        lang=args.lang,
    )
    try:
        out = extract(_read_texts(args.input), cfg, args.out)
    except (ModelLoadError, SequenceTooLong) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
