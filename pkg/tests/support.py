"""Script builders and an engine-independent reference trace."""

from __future__ import annotations

from selfrefine.backend import BackendScript, ScriptedBackend, ScriptedReply
from selfrefine.domain import PromptKind, Query, RefinementMode
from selfrefine.engine import Settings, run_session

Q = "Who was the father of Shinkansen?"


def numbered_script(
    mode: RefinementMode | str,
    rounds: int,
    votes: list[str] = (),
    *,
    prompt_tokens: int = 10,
    completion_tokens: int = 2,
) -> BackendScript:
    """Initial "A0", defects "d1".., candidates "A1"..; candidate k appears in round k."""
    mode = RefinementMode(mode)
    optimize = PromptKind.GUIDED_OPTIMIZATION if mode.analyzes_defects else PromptKind.BLIND_OPTIMIZATION

    def reply(text: str) -> ScriptedReply:
        return ScriptedReply(text, prompt_tokens, completion_tokens)

    queues = {
        PromptKind.INITIAL_ANSWER: [reply("A0")],
        optimize: [reply(f"A{k}") for k in range(1, rounds + 1)],
        PromptKind.VOTE: [reply(v) for v in votes],
    }
    if mode.analyzes_defects:
        queues[PromptKind.DEFECT_ANALYSIS] = [reply(f"d{k}") for k in range(1, rounds + 1)]
    return BackendScript(queues)


def numbered_backend(mode, rounds, votes=(), **kw) -> ScriptedBackend:
    return ScriptedBackend(numbered_script(mode, rounds, list(votes), **kw))


def reference_trace(mode: str, max_iterations: int, votes: list[str]) -> tuple[int, str, int, int]:
    """Walk the loop by hand: returns (final round, stop reason, records, calls).

    Votes are bare labels. Running out of votes in a voting mode counts as a
    backend failure after the defect/optimize calls of that round.
    """
    calls = 1
    incumbent = 0
    records = 0
    for rnd in range(1, max_iterations + 1):
        if mode != "blind":
            calls += 1  # defect analysis
        calls += 1  # optimization
        if mode == "reckless":
            incumbent = rnd
            records += 1
            continue
        if rnd > len(votes):
            return incumbent, "backend_error", records, calls
        calls += 1  # vote
        records += 1
        if votes[rnd - 1] == "2":
            incumbent = rnd
        elif votes[rnd - 1] == "0":
            return incumbent, "vote_tie", records, calls
        else:
            return incumbent, "vote_rejected", records, calls
    return incumbent, "max_iterations", records, calls


def random_transcript(rng):
    """A valid transcript with random texts, votes, mode, budget and usage reporting."""
    alphabet = "abcXYZ é中{}\"\\\n 012"

    def text() -> str:
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12))).strip() or "x"

    def reply(content: str) -> ScriptedReply:
        if rng.random() < 0.15:
            return ScriptedReply(content, None, None)
        return ScriptedReply(content, rng.randint(0, 500), rng.randint(0, 80))

    mode = rng.choice(list(RefinementMode))
    n = rng.randint(0, 5)
    depth = rng.randint(0, n + 1)  # may run short to produce backend errors
    queues = {
        PromptKind.INITIAL_ANSWER: [reply(text())],
        PromptKind.DEFECT_ANALYSIS: [reply(text()) for _ in range(depth)],
        PromptKind.GUIDED_OPTIMIZATION: [reply(text()) for _ in range(depth)],
        PromptKind.BLIND_OPTIMIZATION: [reply(text()) for _ in range(depth)],
        PromptKind.VOTE: [reply(rng.choice(["0", "1", "2", "2", "2", "2.", "nope"])) for _ in range(depth)],
    }
    query = Query(f"q{rng.randint(0, 999)}", text(), n)
    model = rng.choice(["cheap-model", "big-model", "m"])
    return run_session(query, mode, ScriptedBackend(queues), Settings(model=model))
