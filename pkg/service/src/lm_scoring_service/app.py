"""The scoring wire protocol over HTTP.

POST /score  {"texts": [str, ...]} -> {"ppl": [float, ...], "model": str}
GET  /health -> {"model": str, "ready": bool}

Responses align one perplexity per input text, in order. Unusable inputs
(empty, over the model's token limit, over the batch cap) are rejected with
a 4xx protocol error; nothing is truncated silently.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .model import PerplexityModel, ScoringFailure


class ScoreRequest(BaseModel):
    texts: list[str]


class ScoreResponse(BaseModel):
    ppl: list[float]
    model: str


def create_app(model: PerplexityModel, max_batch: int = 256) -> FastAPI:
    app = FastAPI(title="lm-scoring-service")

    @app.get("/health")
    def health() -> dict:
        return {"model": model.model_id, "ready": True}

    @app.post("/score", response_model=ScoreResponse)
    def score(request: ScoreRequest) -> ScoreResponse:
        if len(request.texts) > max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.texts)} exceeds limit {max_batch}",
            )
        try:
            values = model.compute_ppl_batch(request.texts)
        except ScoringFailure as err:
            raise HTTPException(status_code=422, detail=str(err)) from err
        return ScoreResponse(ppl=values, model=model.model_id)

    return app
