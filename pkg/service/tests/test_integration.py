"""End-to-end: the generator's HTTP scoring client against a live service.

Covers the protocol-conformance acceptance items: 1000 sentences round-trip
with order-aligned finite values, and word-shuffling a fluent sentence
raises its perplexity in 10 of 10 trials.
"""

import math
import random
import socket
import threading
import time

import pytest
import uvicorn

from lm_scoring_service import PerplexityModel, create_app

from conftest import TRAINING_SENTENCES

mddtext_scoring = pytest.importorskip(
    "mddtext.scoring", reason="generator package not installed"
)


@pytest.fixture(scope="module")
def live_endpoint(tiny_model_dir):
    model = PerplexityModel(tiny_model_dir, device="cpu")
    app = create_app(model, max_batch=2048)
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("service did not come up")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def test_thousand_sentences_round_trip(live_endpoint):
    rng = random.Random(11)
    texts = []
    for _ in range(1000):
        base = rng.choice(TRAINING_SENTENCES).split()
        k = rng.randint(5, len(base))
        texts.append(" ".join(base[:k]) + " .")
    values = mddtext_scoring.external_score(live_endpoint, texts, timeout=300)
    assert len(values) == 1000
    assert all(math.isfinite(v) and v > 0 for v in values)
    # order alignment: identical inputs must get identical outputs
    echo = mddtext_scoring.external_score(
        live_endpoint, [texts[0], texts[500], texts[0]], timeout=300
    )
    assert echo[0] == echo[2]


def test_shuffled_words_score_worse_ten_of_ten(live_endpoint):
    rng = random.Random(23)
    wins = 0
    for trial in range(10):
        sentence = TRAINING_SENTENCES[trial]
        words = sentence.split()
        shuffled = words[:]
        while shuffled == words:
            rng.shuffle(shuffled)
        ppl = mddtext_scoring.external_score(
            live_endpoint, [sentence, " ".join(shuffled)], timeout=300
        )
        wins += ppl[0] < ppl[1]
    assert wins == 10


def test_ranking_through_external_scorer(live_endpoint):
    scorer = mddtext_scoring.ExternalScorer(live_endpoint, timeout=300)
    sentences = [tuple(s.split()[:-1]) for s in TRAINING_SENTENCES[:6]]
    ranked = mddtext_scoring.score_and_rank(sentences, scorer, batch_size=3)
    assert [s.rank for s in ranked] == list(range(1, 7))
    ppls = [s.ppl for s in ranked]
    assert ppls == sorted(ppls)
    assert ranked[0].scorer_id.startswith("external:")
