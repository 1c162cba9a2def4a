"""Builds a tiny causal LM the service tests can load like any pretrained
model: word-level tokenizer, two-layer transformer, trained on a toy corpus
until it clearly prefers its training sentences."""

import random

import pytest
import torch

TRAINING_SENTENCES = [
    "the small cat sees a big dog in the old garden .",
    "the big dog sees a small cat in the old house .",
    "a small dog runs to the old house near the lake .",
    "the old man walks to the big house near the park .",
    "a big cat walks in the old park near the house .",
    "the small bird flies to the old tree in the park .",
    "a big bird flies in the old garden near the tree .",
    "the old woman walks in the big garden near the lake .",
    "the small dog runs in the big park near the tree .",
    "a small cat sleeps in the old house near the park .",
    "the big cat sleeps in the old garden near the lake .",
    "the old man sees a small bird in the big tree .",
    "a big dog sleeps in the old park near the house .",
    "the small boy runs to the big lake in the park .",
    "the old woman sees a big cat in the small garden .",
    "a small boy walks to the old tree near the lake .",
    "the big boy sees a small dog in the old park .",
    "the small girl walks in the old park near the tree .",
    "a big girl runs to the old garden near the house .",
    "the old girl sees a small cat in the big house .",
]


def _build_tokenizer(tmp_dir):
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from transformers import PreTrainedTokenizerFast

    words = sorted({w for s in TRAINING_SENTENCES for w in s.split()})
    vocab = {"[UNK]": 0, "[BOS]": 1}
    for w in words:
        vocab[w] = len(vocab)
    tok = Tokenizer(WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="[UNK]", bos_token="[BOS]"
    )
    return fast


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    from transformers import GPT2Config, GPT2LMHeadModel

    torch.manual_seed(7)
    random.seed(7)
    out = tmp_path_factory.mktemp("tiny-lm") / "model"

    tokenizer = _build_tokenizer(out)
    config = GPT2Config(
        vocab_size=len(tokenizer),
        n_positions=48,
        n_embd=64,
        n_layer=2,
        n_head=2,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.bos_token_id,
    )
    model = GPT2LMHeadModel(config)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=5e-3)

    encoded = [
        torch.tensor([tokenizer.bos_token_id] + tokenizer(s)["input_ids"])
        for s in TRAINING_SENTENCES
    ]
    max_len = max(len(e) for e in encoded)
    pad = tokenizer.bos_token_id
    batch = torch.full((len(encoded), max_len), pad, dtype=torch.long)
    mask = torch.zeros((len(encoded), max_len), dtype=torch.long)
    for i, e in enumerate(encoded):
        batch[i, : len(e)] = e
        mask[i, : len(e)] = 1
    labels = batch.masked_fill(mask == 0, -100)

    for step in range(400):
        optimizer.zero_grad()
        loss = model(batch, attention_mask=mask, labels=labels).loss
        loss.backward()
        optimizer.step()
        if loss.item() < 0.05:
            break
    model.eval()

    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)
