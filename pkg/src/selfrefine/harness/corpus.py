from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..backend.base import Backend
from ..domain import Query, RefinementMode, Transcript
from ..engine import DEFAULT_MODEL, Settings, run_session
from ..errors import EmptyCorpus, SchemaError
from .transcripts import write_transcripts

DEFAULT_MAX_ITERATIONS = 3


@dataclass(frozen=True)
class CorpusItem:
    id: str
    question: str
    # Annotation for human reviewers; never sent to the model.
    reference_answer: str | None = None


def _parse_corpus_lines(lines: Iterable[str]) -> list[CorpusItem]:
    items: list[CorpusItem] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from exc
        if not isinstance(data, dict) or not isinstance(data.get("id"), str) or not isinstance(data.get("question"), str):
            raise SchemaError("corpus line needs string 'id' and 'question'", lineno)
        ref = data.get("reference_answer")
        if ref is not None and not isinstance(ref, str):
            raise SchemaError("'reference_answer' must be a string", lineno)
        if data["id"] in seen:
            raise SchemaError(f"duplicate id {data['id']!r}", lineno)
        seen.add(data["id"])
        items.append(CorpusItem(data["id"], data["question"], ref))
    return items


def load_corpus(path: str | Path) -> list[CorpusItem]:
    with open(path, encoding="utf-8") as fh:
        return _parse_corpus_lines(fh)


def demo_corpus() -> list[CorpusItem]:
    """The five everyday questions bundled with the package, with reference answers."""
    text = resources.files("selfrefine.data").joinpath("demo_corpus.jsonl").read_text(encoding="utf-8")
    return _parse_corpus_lines(text.splitlines())


@dataclass(frozen=True)
class RunConfig:
    modes: tuple[RefinementMode, ...] = (RefinementMode.FULL,)
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    settings: Settings = field(default_factory=Settings)
    concurrency: int = 1
    output: Path | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(RefinementMode(m) for m in self.modes))
        if not self.modes:
            raise ValueError("at least one mode is required")
        if self.concurrency < 1:
            raise ValueError("concurrency limit must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")

    @property
    def model(self) -> str:
        return self.settings.model or DEFAULT_MODEL


def run_corpus(corpus: Sequence[CorpusItem], config: RunConfig, backend: Backend) -> list[Transcript]:
    """Run every (item, mode) pair; results follow corpus order, then mode order."""
    if not corpus:
        raise EmptyCorpus("corpus is empty")
    jobs = [
        (Query(item.id, item.question.strip(), config.max_iterations), mode) for item in corpus for mode in config.modes
    ]

    def run(job: tuple[Query, RefinementMode]) -> Transcript:
        return run_session(job[0], job[1], backend, config.settings)

    if config.concurrency == 1:
        results = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            results = list(pool.map(run, jobs))

    if config.output is not None:
        write_transcripts(results, config.output)
    return results
