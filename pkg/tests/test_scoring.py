import json
import math
import sys
import threading
from fractions import Fraction
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mddtext.errors import EmptyCorpusError, ProtocolError, ScoringError, TransportError
from mddtext.scoring import (
    BOS,
    ExternalScorer,
    MarkovScorer,
    SubprocessScorer,
    external_score,
    perplexity,
    score_and_rank,
    train_markov,
)

TOY_CORPUS = [["a", "b"], ["a", "b"], ["a", "c"]]


class ConstantModel:
    """Every conditional probability is the same value."""

    order = 1

    def __init__(self, p: float):
        self._logp = math.log(p)

    def cond_logprob(self, ctx, word):
        return self._logp


def test_markov_count_ratio_in_small_alpha_limit():
    model = train_markov(TOY_CORPUS, order=1, alpha=Fraction(1, 10**12))
    assert model.counts[("a",)]["b"] == 2
    assert model.context_totals[("a",)] == 3
    assert abs(float(model.cond_prob(("a",), "b")) - 2 / 3) < 1e-9


def test_markov_distributions_sum_to_one_exactly():
    model = train_markov(TOY_CORPUS, order=1, alpha=Fraction(1, 10))
    for ctx in [(BOS,), ("a",), ("b",), ("zzz",)]:
        total = sum(model.cond_prob(ctx, w) for w in model.vocab)
        assert total == 1


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.lists(st.sampled_from("abcde"), min_size=1, max_size=6),
        min_size=1,
        max_size=8,
    ),
    st.integers(1, 3),
)
def test_markov_normalization_property(sentences, order):
    model = train_markov(sentences, order=order, alpha=Fraction(1, 7))
    contexts = list(model.counts)[:5] + [("unseen",) * order]
    for ctx in contexts:
        assert sum(model.cond_prob(ctx, w) for w in model.vocab) == 1


def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpusError):
        train_markov([], order=1)


def test_constant_conditional_identities():
    half = ConstantModel(0.5)
    for length in range(1, 51):
        assert abs(perplexity(half, ["w"] * length) - 2.0) < 1e-9
    ones = ConstantModel(1.0)
    assert perplexity(ones, ["w", "x", "y"]) == pytest.approx(1.0)


def test_toy_corpus_ppl_matches_hand_arithmetic():
    model = train_markov(TOY_CORPUS, order=1, alpha=Fraction(1, 10))
    # by hand: P(a|<s>) = (3 + .1) / (3 + .3) = 31/33
    #          P(b|a)   = (2 + .1) / (3 + .3) = 21/33 = 7/11
    expected = (float(Fraction(31, 33) * Fraction(7, 11))) ** -0.5
    assert perplexity(model, ["a", "b"]) == pytest.approx(expected, abs=1e-9)
    assert perplexity(model, ["a", "b"]) >= 1.0


def test_markov_ppl_at_least_one():
    model = train_markov(TOY_CORPUS, order=2, alpha=Fraction(1, 10))
    for sentence in (["a"], ["a", "b"], ["c", "c", "c"], ["b", "a"]):
        assert perplexity(model, sentence) >= 1.0


def test_score_and_rank_orders_and_ties():
    model = train_markov(TOY_CORPUS, order=1, alpha=Fraction(1, 10))
    scorer = MarkovScorer(model)
    sentences = [("a", "c"), ("a", "b"), ("c", "a")]
    ranked = score_and_rank(sentences, scorer, batch_size=2)
    assert [s.rank for s in ranked] == [1, 2, 3]
    assert ranked[0].ppl <= ranked[1].ppl <= ranked[2].ppl
    assert sorted(s.words for s in ranked) == sorted(sentences)

    # input permutation cannot change the output
    again = score_and_rank(list(reversed(sentences)), scorer, batch_size=1)
    assert [s.words for s in again] == [s.words for s in ranked]

    class Flat:
        scorer_id = "flat"

        def score_batch(self, batch):
            return [7.0] * len(batch)

    tied = score_and_rank(sentences, Flat())
    assert [s.words for s in tied] == sorted(sentences)
    assert score_and_rank([], scorer) == []


def test_geometric_mean_is_length_invariant_for_fixed_conditionals():
    model = ConstantModel(0.25)
    values = {round(perplexity(model, ["q"] * k), 9) for k in (1, 5, 25)}
    assert values == {4.0}


# -- external scorer ----------------------------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    behavior = "echo-1"
    calls = 0

    def log_message(self, *args):
        pass

    def do_POST(self):
        cls = type(self)
        cls.calls += 1
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        texts = body["texts"]
        if cls.behavior == "flaky" and cls.calls == 1:
            self.send_response(503)
            self.end_headers()
            return
        if cls.behavior == "malformed":
            payload = {"ppl": [1.0], "model": "stub"}  # wrong length
        elif cls.behavior == "text-length":
            payload = {"ppl": [float(len(t)) for t in texts], "model": "stub"}
        else:
            payload = {"ppl": [1.0] * len(texts), "model": "stub"}
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.behavior = "echo-1"
    _StubHandler.calls = 0
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_external_score_stub_round_trip(stub_server):
    assert external_score(stub_server, []) == []
    got = external_score(stub_server, ["one.", "two."])
    assert got == [1.0, 1.0]


def test_external_score_retries_transient_failure(stub_server):
    _StubHandler.behavior = "flaky"
    got = external_score(stub_server, ["one."], retries=2, backoff=0.01)
    assert got == [1.0]
    assert _StubHandler.calls == 2


def test_external_score_protocol_error(stub_server):
    _StubHandler.behavior = "malformed"
    with pytest.raises(ProtocolError):
        external_score(stub_server, ["one.", "two."])


def test_external_score_unreachable():
    with pytest.raises(TransportError):
        external_score("http://127.0.0.1:9", ["x."], retries=1, backoff=0.01)


def test_external_scorer_in_ranking(stub_server):
    _StubHandler.behavior = "text-length"
    scorer = ExternalScorer(stub_server, backoff=0.01)
    ranked = score_and_rank([("bb", "cc"), ("a",)], scorer, batch_size=16)
    assert [s.words for s in ranked] == [("a",), ("bb", "cc")]
    assert ranked[0].scorer_id == "external:stub"


SUBPROC_SCRIPT = """
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps({"id": req["id"], "ppl": float(len(req["text"]))}))
    sys.stdout.flush()
"""


def test_subprocess_scorer_round_trip():
    scorer = SubprocessScorer([sys.executable, "-c", SUBPROC_SCRIPT])
    try:
        got = scorer.score_batch([("ab",), ("cdef",)])
        assert got == [3.0, 5.0]  # text includes the final period
        again = scorer.score_batch([("ab",)])
        assert again == [3.0]
    finally:
        scorer.close()


def test_perplexity_rejects_empty_sentence():
    model = train_markov(TOY_CORPUS, order=1)
    with pytest.raises(ValueError):
        perplexity(model, [])
