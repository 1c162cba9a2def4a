"""Perplexity scoring and ranking of generated sentences.

Two scorer families share one small protocol (`score_batch` over word
tuples): a built-in additive-smoothed Markov model trained on the input
corpus, and clients for an external language-model scorer reachable over
HTTP or as a line-oriented subprocess. Perplexity is the geometric mean of
the inverse conditional likelihood of the sequence, computed in log space.
"""

from __future__ import annotations

import json
import math
import subprocess
import time
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Protocol, Sequence

import requests

from .errors import EmptyCorpusError, ProtocolError, ScoringError, TransportError

BOS = "<s>"


def _surfaces(words: Iterable) -> tuple[str, ...]:
    return tuple(w if isinstance(w, str) else w.surface for w in words)


class MarkovModel:
    """Order-k conditional word model with additive smoothing.

    P(w | ctx) = (count(ctx, w) + alpha) / (count(ctx) + alpha * |vocab|),
    so every conditional is positive and each context distribution sums to
    exactly one.
    """

    def __init__(self, order: int, alpha: Fraction):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.order = order
        self.alpha = alpha
        self.counts: dict[tuple[str, ...], Counter] = {}
        self.context_totals: Counter = Counter()
        self.vocab: set[str] = set()

    def ingest(self, sentence: Sequence) -> None:
        words = _surfaces(sentence)
        self.vocab.update(words)
        ctx = (BOS,) * self.order
        for w in words:
            bucket = self.counts.get(ctx)
            if bucket is None:
                bucket = self.counts[ctx] = Counter()
            bucket[w] += 1
            self.context_totals[ctx] += 1
            ctx = ctx[1:] + (w,)

    def cond_prob(self, ctx: tuple[str, ...], word: str) -> Fraction:
        bucket = self.counts.get(ctx)
        count = bucket[word] if bucket else 0
        total = self.context_totals.get(ctx, 0)
        return (count + self.alpha) / (total + self.alpha * len(self.vocab))

    def cond_logprob(self, ctx: tuple[str, ...], word: str) -> float:
        return math.log(self.cond_prob(ctx, word))


def train_markov(
    corpus_sentences: Iterable[Sequence], order: int = 2, alpha=Fraction(1, 10)
) -> MarkovModel:
    """Count transitions over the corpus with start-of-sentence padding."""
    if not isinstance(alpha, Fraction):
        alpha = Fraction(str(alpha))
    model = MarkovModel(order, alpha)
    for sentence in corpus_sentences:
        model.ingest(sentence)
    if not model.vocab:
        raise EmptyCorpusError("no words to train on")
    return model


def perplexity(model, words: Sequence) -> float:
    """PPL of a word sequence: the n-th root of the inverse sequence
    probability, chained from the model's conditionals."""
    surfaces = _surfaces(words)
    if not surfaces:
        raise ValueError("cannot score an empty sentence")
    if hasattr(model, "cond_logprob"):
        order = getattr(model, "order", 1)
        ctx = (BOS,) * order
        nll = 0.0
        for w in surfaces:
            nll -= model.cond_logprob(ctx, w)
            ctx = ctx[1:] + (w,)
        value = math.exp(nll / len(surfaces))
    else:
        value = model.score_batch([surfaces])[0]
    if not math.isfinite(value):
        raise ScoringError(f"non-finite perplexity for {' '.join(surfaces)!r}")
    return value


@dataclass(frozen=True)
class ScoredSentence:
    words: tuple[str, ...]
    ppl: float
    scorer_id: str
    rank: int = 0

    @property
    def text(self) -> str:
        return " ".join(self.words) + "."

    def as_dict(self) -> dict:
        return {
            "rank": self.rank,
            "ppl": self.ppl,
            "text": self.text,
            "words": list(self.words),
            "scorer": self.scorer_id,
        }


class Scorer(Protocol):
    scorer_id: str

    def score_batch(self, batch: list[tuple[str, ...]]) -> list[float]: ...


class MarkovScorer:
    """Scores sentences with a trained Markov model; pure and reusable."""

    def __init__(self, model: MarkovModel):
        self.model = model
        self.scorer_id = f"markov-k{model.order}-a{model.alpha}"

    def score_batch(self, batch: list[tuple[str, ...]]) -> list[float]:
        return [perplexity(self.model, words) for words in batch]


def score_and_rank(
    sentences: Iterable[Sequence], scorer, batch_size: int = 64
) -> list[ScoredSentence]:
    """Score everything, sort ascending by perplexity (ties break on the
    sentence text, so the order is a deterministic permutation of the
    input), and assign 1-based ranks."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    all_words = [_surfaces(s) for s in sentences]
    if not all_words:
        return []
    scored: list[ScoredSentence] = []
    for start in range(0, len(all_words), batch_size):
        batch = all_words[start : start + batch_size]
        try:
            values = scorer.score_batch(batch)
        except ScoringError as err:
            raise ScoringError(
                f"{err} (batch starting at sentence {start}: "
                f"{' '.join(batch[0])!r})"
            ) from err
        if len(values) != len(batch):
            raise ProtocolError(
                f"scorer returned {len(values)} values for {len(batch)} sentences"
            )
        for words, value in zip(batch, values):
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ScoringError(
                    f"non-finite perplexity for {' '.join(words)!r}"
                )
            scored.append(
                ScoredSentence(words=words, ppl=float(value), scorer_id=scorer.scorer_id)
            )
    scored.sort(key=lambda s: (s.ppl, s.words))
    return [
        ScoredSentence(words=s.words, ppl=s.ppl, scorer_id=s.scorer_id, rank=i)
        for i, s in enumerate(scored, start=1)
    ]


# -- external scorer over HTTP ----------------------------------------------


def _post_score(
    endpoint: str,
    texts: list[str],
    *,
    timeout: float,
    retries: int,
    backoff: float,
    session=None,
) -> tuple[list[float], str]:
    post = (session or requests).post
    url = endpoint.rstrip("/") + "/score"
    last_error: Exception | None = None
    for attempt in range(retries + 1):
        try:
            response = post(url, json={"texts": texts}, timeout=timeout)
        except requests.RequestException as err:
            last_error = err
            time.sleep(backoff * (2**attempt))
            continue
        if response.status_code >= 500:
            last_error = TransportError(f"server error {response.status_code}")
            time.sleep(backoff * (2**attempt))
            continue
        if response.status_code != 200:
            raise ProtocolError(
                f"scorer rejected the request: {response.status_code} {response.text[:200]}"
            )
        try:
            payload = response.json()
        except ValueError as err:
            raise ProtocolError(f"scorer returned non-JSON: {err}") from err
        ppl = payload.get("ppl")
        if not isinstance(ppl, list) or len(ppl) != len(texts):
            raise ProtocolError("response 'ppl' missing or misaligned with request")
        values = []
        for text, value in zip(texts, ppl):
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise ProtocolError(f"bad perplexity {value!r} for {text!r}")
            values.append(float(value))
        return values, str(payload.get("model", "unknown"))
    raise TransportError(f"scorer unreachable after {retries + 1} attempts: {last_error}")


def external_score(
    endpoint: str,
    texts: list[str],
    *,
    timeout: float = 60.0,
    retries: int = 3,
    backoff: float = 0.25,
    session=None,
) -> list[float]:
    """POST the texts to the /score endpoint, one finite positive PPL per
    input, order-aligned. Transient failures are retried with exponential
    backoff."""
    if not texts:
        return []
    values, _ = _post_score(
        endpoint, texts, timeout=timeout, retries=retries, backoff=backoff, session=session
    )
    return values


class ExternalScorer:
    """Scorer-protocol wrapper around the HTTP client; remembers the model
    id reported by the service so rankings carry their provenance."""

    def __init__(self, endpoint: str, *, timeout: float = 60.0, retries: int = 3,
                 backoff: float = 0.25):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.scorer_id = f"external:{endpoint}"
        self._session = requests.Session()

    def score_batch(self, batch: list[tuple[str, ...]]) -> list[float]:
        texts = [" ".join(words) + "." for words in batch]
        values, model = _post_score(
            self.endpoint,
            texts,
            timeout=self.timeout,
            retries=self.retries,
            backoff=self.backoff,
            session=self._session,
        )
        self.scorer_id = f"external:{model}"
        return values


class SubprocessScorer:
    """Line-oriented scorer: newline-delimited JSON requests
    {"id": int, "text": str} answered by {"id": int, "ppl": number}."""

    def __init__(self, command: list[str]):
        self.command = list(command)
        self.scorer_id = f"subprocess:{self.command[0]}"
        self._proc: subprocess.Popen | None = None
        self._next_id = 0

    def _process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
        self._proc = None

    def score_batch(self, batch: list[tuple[str, ...]]) -> list[float]:
        proc = self._process()
        ids = []
        try:
            for words in batch:
                self._next_id += 1
                ids.append(self._next_id)
                record = {"id": self._next_id, "text": " ".join(words) + "."}
                proc.stdin.write(json.dumps(record) + "\n")
            proc.stdin.flush()
            replies: dict[int, float] = {}
            for _ in batch:
                line = proc.stdout.readline()
                if not line:
                    raise TransportError("scorer subprocess closed its output")
                try:
                    payload = json.loads(line)
                    replies[int(payload["id"])] = float(payload["ppl"])
                except (ValueError, KeyError, TypeError) as err:
                    raise ProtocolError(f"bad scorer reply {line!r}: {err}") from err
        except BrokenPipeError as err:
            raise TransportError(f"scorer subprocess died: {err}") from err
        try:
            values = [replies[i] for i in ids]
        except KeyError as err:
            raise ProtocolError(f"scorer reply missing id {err}") from None
        for value in values:
            if not math.isfinite(value) or value <= 0:
                raise ProtocolError(f"bad perplexity {value!r} from subprocess scorer")
        return values
