import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "smart", "##er", "the", "a", "cat", "dog", "sat", "on", "mat", "ran",
    "fast", "big", "small", "tree", "house", "bird", "river", "jump",
    "##ing", "##ed", "##s", ".", ",", "!", "?",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A deterministic wordpiece model saved locally; no network involved."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    d = tmp_path_factory.mktemp("tiny-bert")
    vocab_file = d / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_file), do_lower_case=True)
    tokenizer.save_pretrained(d)
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(VOCAB), hidden_size=16, num_hidden_layers=3,
        num_attention_heads=2, intermediate_size=32, max_position_embeddings=32,
    )
    BertModel(config).save_pretrained(d)
    return d
