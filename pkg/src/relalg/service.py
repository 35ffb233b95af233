"""HTTP service wrapping the engine for long-running, multi-client use.

One POST endpoint per command; requests carry the document source inline and
responses return the same report payload the CLI emits, plus the exit code
the CLI would have used.  Run with: uvicorn relalg.service:app
"""

from __future__ import annotations

from typing import List, Literal, Optional

from fastapi import FastAPI
from pydantic import BaseModel, Field

from .report import SCHEMA_VERSION, run

app = FastAPI(
    title="relalg",
    description="Structure-equation engine for algebroids relative to submersions.",
    version="0.1.0",
)


class CommandRequest(BaseModel):
    source: str = Field(description="Document text in the declaration language.")
    name: Optional[str] = Field(
        default=None, description="Target declaration when several exist."
    )
    trig_rewrite: bool = False
    deterministic: bool = True


class ProlongRequest(CommandRequest):
    adjoin: List[str] = Field(
        default_factory=list, description="Constraints EXPR=0 to impose."
    )


class TowerRequest(ProlongRequest):
    depth: int = Field(default=1, ge=1)


class RealizeRequest(CommandRequest):
    realization: Optional[str] = None


class CommandResponse(BaseModel):
    exit_code: int
    report: dict
    text: str


class HealthResponse(BaseModel):
    status: Literal["ok"]
    schema_version: int


def _respond(report) -> CommandResponse:
    return CommandResponse(
        exit_code=report.exit_code, report=report.payload, text=report.text
    )


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", schema_version=SCHEMA_VERSION)


@app.post("/check", response_model=CommandResponse)
def check(request: CommandRequest) -> CommandResponse:
    return _respond(
        run(
            request.source,
            "check",
            name=request.name,
            trig=request.trig_rewrite,
            deterministic=request.deterministic,
        )
    )


@app.post("/bracket", response_model=CommandResponse)
def bracket(request: CommandRequest) -> CommandResponse:
    return _respond(
        run(
            request.source,
            "bracket",
            name=request.name,
            trig=request.trig_rewrite,
            deterministic=request.deterministic,
        )
    )


@app.post("/prolong", response_model=CommandResponse)
def prolong(request: ProlongRequest) -> CommandResponse:
    return _respond(
        run(
            request.source,
            "prolong",
            name=request.name,
            adjoin=request.adjoin,
            trig=request.trig_rewrite,
            deterministic=request.deterministic,
        )
    )


@app.post("/tower", response_model=CommandResponse)
def tower(request: TowerRequest) -> CommandResponse:
    return _respond(
        run(
            request.source,
            "tower",
            name=request.name,
            depth=request.depth,
            adjoin=request.adjoin,
            trig=request.trig_rewrite,
            deterministic=request.deterministic,
        )
    )


@app.post("/realize", response_model=CommandResponse)
def realize(request: RealizeRequest) -> CommandResponse:
    return _respond(
        run(
            request.source,
            "realize",
            realization=request.realization,
            trig=request.trig_rewrite,
            deterministic=request.deterministic,
        )
    )


@app.post("/jets", response_model=CommandResponse)
def jets(request: CommandRequest) -> CommandResponse:
    return _respond(
        run(
            request.source,
            "jets",
            name=request.name,
            trig=request.trig_rewrite,
            deterministic=request.deterministic,
        )
    )
