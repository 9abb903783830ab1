import numpy as np
import pytest

from otmetrics.embedding_io import EmbeddingFileHeader, SegmentRecord, TokenRecord


def token(surface, word_index, layers, is_punct=False):
    return TokenRecord(
        surface=surface,
        word_index=word_index,
        is_first_piece=not surface.startswith("##"),
        is_punct=is_punct,
        layers=np.asarray(layers, dtype=float),
    )


def segment(seg_id, tokens, role="reference", system_id=None, lang="en"):
    if role == "hypothesis" and system_id is None:
        system_id = "sys"
    return SegmentRecord(
        segment_id=seg_id, role=role, system_id=system_id, lang=lang, tokens=tuple(tokens)
    )


@pytest.fixture
def header_2d():
    return EmbeddingFileHeader(dim=2, n_layers=1, model_id="test")


def word_tokens(words, rng, dim=2, n_layers=1, punct=()):
    """One single-piece token per word with seeded random layer stacks."""
    toks = []
    for i, word in enumerate(words):
        toks.append(
            token(word, i, rng.standard_normal((n_layers, dim)), is_punct=word in punct)
        )
    return toks
