"""Perplexity computation with a pretrained causal language model.

PPL of a text is exp of the mean negative log-likelihood per predicted
token, over the model's own tokenization. A BOS token is prepended when the
tokenizer has one, so even single-token texts have a conditional to score.
Inference runs text by text: values are independent of how requests are
batched, and repeated scoring is deterministic for a fixed model revision.
"""

from __future__ import annotations

import math

import torch


class ScoringFailure(ValueError):
    """Input cannot be scored (empty, too long, or untokenizable)."""


class PerplexityModel:
    def __init__(self, model_id: str, device: str = "cpu"):
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.model_id = model_id
        self.device = torch.device(device)
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id)
        self.model.to(self.device)
        self.model.eval()
        self.max_tokens = int(
            getattr(self.model.config, "n_positions", None)
            or getattr(self.model.config, "max_position_embeddings", 1024)
        )

    def _encode(self, text: str) -> torch.Tensor:
        if not text or not text.strip():
            raise ScoringFailure("text is empty")
        ids = self.tokenizer(text, return_tensors="pt")["input_ids"][0]
        bos = self.tokenizer.bos_token_id
        if bos is None:
            bos = self.tokenizer.eos_token_id
        if bos is not None and (len(ids) == 0 or ids[0].item() != bos):
            ids = torch.cat([torch.tensor([bos]), ids])
        if len(ids) < 2:
            raise ScoringFailure(f"text tokenizes to too few tokens: {text!r}")
        if len(ids) > self.max_tokens:
            raise ScoringFailure(
                f"text is {len(ids)} tokens, model limit is {self.max_tokens}"
            )
        return ids

    def compute_ppl(self, text: str) -> float:
        ids = self._encode(text).to(self.device)
        with torch.no_grad():
            logits = self.model(ids.unsqueeze(0)).logits[0]
        logprobs = torch.log_softmax(logits[:-1].double(), dim=-1)
        nll = -logprobs[torch.arange(len(ids) - 1), ids[1:]]
        value = float(torch.exp(nll.mean()))
        if not math.isfinite(value):
            raise ScoringFailure(f"model produced a non-finite score for {text!r}")
        return value

    def compute_ppl_batch(self, texts: list[str]) -> list[float]:
        return [self.compute_ppl(t) for t in texts]
