#!/usr/bin/env python3
"""Generate the bundled synthetic evaluation corpus under data/synthetic/.

The corpus is small enough for exact solvers but exercises every factor the
sweep varies: multi-piece words (so subword strategies differ), punctuation
tokens, stopwords, and systems of graded quality with correlated human scores.
Everything derives from one seed; rerunning the script reproduces the bundle
byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from otmetrics.embedding_io import EmbeddingFileHeader, SegmentRecord, TokenRecord
from otmetrics.preprocess import bundled_stopword_path

N_LAYERS = 3
DIM = 4

STOPWORDS = ["the", "a", "of", "and", "is"]
CONTENT = [
    "cat", "dog", "house", "tree", "river", "mountain", "bird", "cloud",
    "running", "sleeping", "jumping", "painted", "broken", "quiet", "bright",
    "stone", "window", "garden", "winter", "summer",
]
PIECES = {
    "running": ["runn", "##ing"],
    "sleeping": ["sleep", "##ing"],
    "jumping": ["jump", "##ing"],
    "painted": ["paint", "##ed"],
    "broken": ["brok", "##en"],
    "mountain": ["mount", "##ain"],
}
PUNCT = [".", ",", "!"]

SYSTEMS = {"sysA": 0.05, "sysB": 0.25, "sysC": 0.5}  # corruption rates


def _piece_vectors(word: str, word_vecs: dict, piece_rng: np.random.Generator):
    pieces = PIECES.get(word, [word])
    base = word_vecs[word]
    out = []
    for k, piece in enumerate(pieces):
        out.append((piece, base + 0.05 * k))
    return out


def _tokens_for(words, word_vecs, rng, noise=0.0):
    tokens = []
    word_index = 0
    for word in words:
        for piece, vec in _piece_vectors(word, word_vecs, rng):
            jitter = noise * rng.standard_normal((N_LAYERS, DIM)) if noise else 0.0
            tokens.append(
                TokenRecord(
                    surface=piece,
                    word_index=word_index,
                    is_first_piece=not piece.startswith("##"),
                    is_punct=piece in PUNCT,
                    layers=vec + jitter,
                )
            )
        word_index += 1
    return tuple(tokens)


def build_corpus(seed: int = 0, n_segments: int = 30):
    rng = np.random.default_rng(seed)
    vocab = STOPWORDS + CONTENT + PUNCT
    word_vecs = {w: rng.standard_normal((N_LAYERS, DIM)) for w in vocab}

    header = EmbeddingFileHeader(dim=DIM, n_layers=N_LAYERS, model_id="synthetic-rng", version="1")
    segments: list[SegmentRecord] = []
    judgments: list[tuple[str, str, float, float]] = []

    for i in range(n_segments):
        seg_id = f"seg{i:03d}"
        length = int(rng.integers(4, 9))
        words = [STOPWORDS[int(rng.integers(len(STOPWORDS)))]]
        words += [CONTENT[int(rng.integers(len(CONTENT)))] for _ in range(length - 2)]
        words.append(PUNCT[int(rng.integers(len(PUNCT)))])
        segments.append(
            SegmentRecord(
                segment_id=seg_id, role="reference", system_id=None, lang="en",
                tokens=_tokens_for(words, word_vecs, rng),
            )
        )
        for system, corruption in SYSTEMS.items():
            hyp_words = [
                CONTENT[int(rng.integers(len(CONTENT)))]
                if w not in PUNCT and rng.random() < corruption
                else w
                for w in words
            ]
            segments.append(
                SegmentRecord(
                    segment_id=seg_id, role="hypothesis", system_id=system, lang="en",
                    tokens=_tokens_for(hyp_words, word_vecs, rng, noise=0.02),
                )
            )
            kept = sum(1 for a, b in zip(words, hyp_words) if a == b) / len(words)
            human = 100.0 * kept + rng.normal(0, 3.0)
            loglik = rng.normal(-40, 5)  # decoy column, numeric but meaningless
            judgments.append((seg_id, system, round(human, 4), round(loglik, 4)))
    return header, segments, judgments


GRID = {
    "seed": 7,
    "level": "segment",
    "multi_ref": "mean",
    "judgments": {"kind": "da", "segment_col": "segment_id", "system_col": "system_id",
                  "score_col": "score"},
    "stopwords": [
        {"label": "none", "path": None},
        {"label": "153", "path": "stopwords_153.txt"},
        {"label": "179", "path": "stopwords_179.txt"},
        {"label": "mini", "path": "stopwords_mini.txt"},
    ],
    "idf": ["ori", "dis", {"sampled_k": 20}, {"sampled_k": 20}, {"sampled_k": 20}],
    "subword_punct": ["first+pr", "all+pr", "ave-all+pr", "first", "all", "ave-all"],
    "metrics": [
        {"kind": "mover", "n": 1},
        {"kind": "mover", "n": 2},
        {"kind": "bertscore", "variant": "f1"},
        {"kind": "bary", "distance": "wasserstein", "epsilon": 0.5, "n_layers_used": 2,
         "tol": 1e-4},
    ],
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path,
                        default=Path(__file__).resolve().parents[1] / "data" / "synthetic")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--segments", type=int, default=30)
    args = parser.parse_args()

    from otmetrics.embedding_io import write_embedding_file

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    header, segments, judgments = build_corpus(args.seed, args.segments)
    write_embedding_file(out / "embeddings.jsonl", header, segments)

    with open(out / "judgments_da.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_id", "system_id", "score", "model_loglik"])
        writer.writerows(judgments)

    by_segment: dict[str, list[tuple[str, float]]] = {}
    for seg, system, human, _ in judgments:
        by_segment.setdefault(seg, []).append((system, human))
    with open(out / "judgments_darr.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_id", "better_system", "worse_system"])
        for seg, entries in by_segment.items():
            for (sys_a, h_a) in entries:
                for (sys_b, h_b) in entries:
                    if h_a > h_b + 5.0:
                        writer.writerow([seg, sys_a, sys_b])

    shutil.copy(bundled_stopword_path(153), out / "stopwords_153.txt")
    shutil.copy(bundled_stopword_path(179), out / "stopwords_179.txt")
    (out / "stopwords_mini.txt").write_text("\n".join(STOPWORDS) + "\n", encoding="utf-8")
    (out / "grid.json").write_text(json.dumps(GRID, indent=2) + "\n", encoding="utf-8")
    print(f"wrote synthetic corpus to {out}")


if __name__ == "__main__":
    main()
