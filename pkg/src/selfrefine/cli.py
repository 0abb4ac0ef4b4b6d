"""Command-line entry point: ``refine ask|corpus|report|templates``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from .backend import BackendScript, HttpBackend, HttpConfig, ScriptedBackend
from .backend.base import Backend
from .domain import PromptKind, Query, RefinementMode, StopReason
from .engine import DEFAULT_MODEL, Settings, run_session
from .errors import RefineError
from .harness.corpus import DEFAULT_MAX_ITERATIONS, RunConfig, demo_corpus, load_corpus, run_corpus
from .harness.report import PriceSheet, cost_report, format_report
from .harness.transcripts import read_transcripts
from .prompts import TEMPLATES

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _add_backend_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("http", "scripted"), default="http")
    p.add_argument("--script", type=Path, help="scripted backend reply file (JSON)")
    p.add_argument("--model", default=DEFAULT_MODEL)
    p.add_argument("--base-url", help="OpenAI-compatible base URL (default: $REFINE_BASE_URL or OpenAI)")
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERATIONS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="refine", description="Let a chat model refine its own answers.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    ask = sub.add_parser("ask", help="refine the answer to one question")
    ask.add_argument("--question", required=True)
    ask.add_argument("--mode", choices=[m.value for m in RefinementMode], default="full")
    ask.add_argument("--verbose", action="store_true", help="show every hidden call on stderr")
    _add_backend_args(ask)

    corpus = sub.add_parser("corpus", help="run a question file through one or more modes")
    corpus.add_argument("--file", type=Path, help="JSONL corpus (default: bundled demo questions)")
    corpus.add_argument("--modes", default="full", help="comma-separated: full,blind,reckless")
    corpus.add_argument("--out", type=Path, required=True)
    corpus.add_argument("--concurrency", type=int, default=1)
    _add_backend_args(corpus)

    report = sub.add_parser("report", help="summarize tokens and cost of a transcript file")
    report.add_argument("--in", dest="input", type=Path, required=True)
    report.add_argument("--prices", type=Path)
    report.add_argument("--json", action="store_true")

    sub.add_parser("templates", help="print the prompt templates")
    return parser


def _make_backend(args: argparse.Namespace) -> Backend:
    if args.backend == "scripted":
        if args.script is None:
            raise UsageError("--backend scripted requires --script")
        return ScriptedBackend(BackendScript.from_file(args.script))
    return HttpBackend(HttpConfig.from_env(base_url=args.base_url))


def _check_iters(args: argparse.Namespace) -> None:
    if args.max_iters < 0:
        raise UsageError("--max-iters must be >= 0")


def _cmd_ask(args: argparse.Namespace) -> int:
    _check_iters(args)
    text = args.question.strip()
    if not text:
        raise UsageError("--question must not be empty")
    backend = _make_backend(args)

    def show(kind: PromptKind, round: int, prompt: str, reply: str) -> None:
        print(f"--- round {round} [{kind.value}]\n>>> {prompt}\n<<< {reply}", file=sys.stderr)

    transcript = run_session(
        Query("cli", text, args.max_iters),
        args.mode,
        backend,
        Settings(model=args.model),
        observer=show if args.verbose else None,
    )
    if args.verbose:
        total = transcript.ledger.total()
        print(
            f"--- stop: {transcript.stop_reason.value} after {len(transcript.records)} round(s); "
            f"{len(transcript.ledger)} calls, {total.total_tokens if total.total_tokens is not None else 'unknown'} tokens",
            file=sys.stderr,
        )
    if transcript.final.text:
        print(transcript.final.text)
    if transcript.stop_reason is StopReason.BACKEND_ERROR:
        print(f"refine: session aborted: {transcript.error}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_corpus(args: argparse.Namespace) -> int:
    _check_iters(args)
    try:
        modes = tuple(RefinementMode(m.strip()) for m in args.modes.split(",") if m.strip())
    except ValueError as exc:
        raise UsageError(f"--modes: {exc}") from None
    if not modes:
        raise UsageError("--modes must name at least one mode")
    if args.concurrency < 1:
        raise UsageError("--concurrency must be >= 1")
    items = load_corpus(args.file) if args.file else demo_corpus()
    config = RunConfig(
        modes=modes,
        max_iterations=args.max_iters,
        settings=Settings(model=args.model),
        concurrency=args.concurrency,
        output=args.out,
    )
    transcripts = run_corpus(items, config, _make_backend(args))
    failed = sum(t.stop_reason is StopReason.BACKEND_ERROR for t in transcripts)
    print(f"wrote {len(transcripts)} transcripts to {args.out} ({failed} aborted)", file=sys.stderr)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    prices = PriceSheet.from_file(args.prices) if args.prices else None
    report = cost_report(read_transcripts(args.input), prices)
    print(json.dumps(report.to_dict(), indent=2) if args.json else format_report(report))
    return EXIT_OK


def _cmd_templates(args: argparse.Namespace) -> int:
    print(f"[{PromptKind.INITIAL_ANSWER.value}]\n{{q}}\n")
    for kind, template in TEMPLATES.items():
        print(f"[{kind.value}]\n{template}\n")
    return EXIT_OK


COMMANDS = {"ask": _cmd_ask, "corpus": _cmd_corpus, "report": _cmd_report, "templates": _cmd_templates}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (RefineError, OSError, json.JSONDecodeError) as exc:
        print(f"refine: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
