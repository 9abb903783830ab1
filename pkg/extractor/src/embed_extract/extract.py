"""Extract per-token hidden states from a pretrained encoder.

Output is the line-delimited JSON interchange format consumed by the metrics
toolkit: a header line carrying dim/n_layers/model_id, then one segment
object per input text. This package deliberately shares no code with the
consumer; conformance is by format contract alone.

Conventions written into the file:

* continuation wordpieces keep their "##" marker and is_first_piece=False;
* a piece is punctuation iff every character (marker stripped) is in a
  Unicode punctuation category;
* stored layers are ordered shallow to deep, whatever subset was requested;
* special tokens (sequence delimiters) are excluded;
* vector components carry at most 9 significant decimal digits.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

FORMAT_VERSION = "1"


class ModelLoadError(Exception):
    pass


class SequenceTooLong(Exception):
    def __init__(self, segment_id: str, length: int, limit: int):
        self.segment_id = segment_id
        super().__init__(
            f"segment {segment_id!r} tokenizes to {length} pieces, over the limit {limit}; "
            "pass max_len to truncate explicitly"
        )


@dataclass(frozen=True)
class ExtractorConfig:
    model_id: str
    # python-style indices into the model's hidden-state stack
    # (0 = embedding output, negative = from the deep end)
    layers: tuple[int, ...] = (-5, -4, -3, -2, -1)
    lowercase: bool = False
    batch_size: int = 8
    device: str = "cpu"
    max_len: int | None = None  # None = over-long inputs are an error
    lang: str = ""  # written into every segment record

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("layers must be non-empty")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class TextItem:
    segment_id: str
    role: str  # "reference" | "hypothesis"
    system_id: str | None
    text: str


def is_punct_piece(piece: str) -> bool:
    body = piece[2:] if piece.startswith("##") else piece
    return bool(body) and all(unicodedata.category(ch).startswith("P") for ch in body)


def _fmt(value: float) -> float:
    return float(format(float(value), ".9g"))


def _resolve_layers(requested: Sequence[int], n_states: int) -> list[int]:
    resolved = set()
    for idx in requested:
        real = idx + n_states if idx < 0 else idx
        if not 0 <= real < n_states:
            raise ValueError(f"layer index {idx} outside the model's {n_states} hidden states")
        resolved.add(real)
    # the file contract orders layers shallow to deep, whatever was requested
    return sorted(resolved)


def _load(cfg: ExtractorConfig):
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(cfg.model_id)
        model = AutoModel.from_pretrained(cfg.model_id, output_hidden_states=True)
    except Exception as exc:  # transformers raises a zoo of types here
        raise ModelLoadError(f"could not load {cfg.model_id!r}: {exc}") from exc
    model.to(cfg.device)
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model


def _token_objects(pieces: list[str], vectors) -> list[dict]:
    tokens = []
    word_index = -1
    for pos, piece in enumerate(pieces):
        first = not piece.startswith("##")
        if first or word_index < 0:
            word_index += 1
        tokens.append(
            {
                "surface": piece,
                "word_index": word_index,
                "is_first_piece": first,
                "is_punct": is_punct_piece(piece),
                "layers": [[_fmt(v) for v in layer] for layer in vectors[pos]],
            }
        )
    return tokens


def extract(texts: Iterable[TextItem | tuple], cfg: ExtractorConfig, out_path: str | Path) -> Path:
    """Write one segment per input text to out_path. Deterministic for a
    fixed config: the model runs in eval mode and batches are formed in
    input order."""
    items = [t if isinstance(t, TextItem) else TextItem(*t) for t in texts]
    if not items:
        raise ValueError("no texts to extract")
    tokenizer, model = _load(cfg)
    import torch

    n_states = model.config.num_hidden_layers + 1
    layer_ids = _resolve_layers(cfg.layers, n_states)
    dim = model.config.hidden_size
    hard_limit = int(getattr(model.config, "max_position_embeddings", tokenizer.model_max_length))
    limit = min(cfg.max_len, hard_limit) if cfg.max_len is not None else hard_limit
    special_ids = set(tokenizer.all_special_ids)

    encodings = []
    for item in items:
        text = item.text.lower() if cfg.lowercase else item.text
        ids = tokenizer(text, add_special_tokens=True)["input_ids"]
        if len(ids) > limit:
            if cfg.max_len is None:
                raise SequenceTooLong(item.segment_id, len(ids), limit)
            ids = ids[:limit]
        encodings.append(ids)

    out_path = Path(out_path)
    header = {
        "dim": dim,
        "n_layers": len(layer_ids),
        "model_id": cfg.model_id,
        "version": FORMAT_VERSION,
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False, separators=(",", ":")) + "\n")
        for start in range(0, len(items), cfg.batch_size):
            batch_items = items[start : start + cfg.batch_size]
            batch_ids = encodings[start : start + cfg.batch_size]
            width = max(len(ids) for ids in batch_ids)
            input_ids = torch.full((len(batch_ids), width), tokenizer.pad_token_id or 0,
                                   dtype=torch.long)
            attention = torch.zeros((len(batch_ids), width), dtype=torch.long)
            for row, ids in enumerate(batch_ids):
                input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
                attention[row, : len(ids)] = 1
            output = model(input_ids=input_ids.to(cfg.device),
                           attention_mask=attention.to(cfg.device))
            stack = [output.hidden_states[i].cpu() for i in layer_ids]
            for row, (item, ids) in enumerate(zip(batch_items, batch_ids)):
                keep = [pos for pos, tid in enumerate(ids) if tid not in special_ids]
                pieces = tokenizer.convert_ids_to_tokens([ids[pos] for pos in keep])
                vectors = [
                    [stack[k][row, pos].tolist() for k in range(len(layer_ids))]
                    for pos in keep
                ]
                segment = {
                    "segment_id": item.segment_id,
                    "role": item.role,
                    "system_id": item.system_id,
                    "lang": cfg.lang,
                    "tokens": _token_objects(pieces, vectors),
                }
                fh.write(json.dumps(segment, ensure_ascii=False, separators=(",", ":")) + "\n")
    return out_path
