"""Prompt templates and rendering.

Each template has slots ``{q}`` (question), ``{a}`` (incumbent answer),
``{a*}`` (optimized candidate) and ``{d}`` (defect sentence). Substitution
is a single regex pass over the template, so brace sequences inside user
or model text are copied through verbatim and never expanded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .domain import Answer, DefectReport, PromptKind, Query
from .errors import InvalidAnswer, MissingDefect, OrderingError

DEFECT_TEMPLATE = (
    "Please list the defects of answer {a} to the question {q}. "
    "List the defects in one sentence instead of a list with line breaks!"
)

GUIDED_OPTIMIZATION_TEMPLATE = (
    "The answer {a} to the question {q} is not optimal because that {d}. "
    "Please refine the answer providing a better one regarding the aforementioned flaw. "
    "You should provide nothing but the answer."
)

BLIND_OPTIMIZATION_TEMPLATE = (
    "The answer {a} to the question {q} may be suboptimal. "
    "Please refine the answer providing a better one. "
    "You should provide nothing but the answer."
)

VOTE_TEMPLATE = (
    "The question is {q}, to which there are two optimal answers, one is {a}, the other one is {a*}. "
    'Please answer either "1" or "2" if you think one of them is better, '
    "or \"0\" if you think they're equally good. "
    "Do not reply anything else than a number!"
)

TEMPLATES: dict[PromptKind, str] = {
    PromptKind.DEFECT_ANALYSIS: DEFECT_TEMPLATE,
    PromptKind.GUIDED_OPTIMIZATION: GUIDED_OPTIMIZATION_TEMPLATE,
    PromptKind.BLIND_OPTIMIZATION: BLIND_OPTIMIZATION_TEMPLATE,
    PromptKind.VOTE: VOTE_TEMPLATE,
}

_SLOT = re.compile(r"\{(q|a\*|a|d)\}")


@dataclass(frozen=True)
class PromptText:
    kind: PromptKind
    text: str


def fill(template: str, **slots: str) -> str:
    """Substitute slots in one left-to-right pass.

    ``a*`` is passed as ``a_star``. A slot missing from ``slots`` raises
    ``KeyError`` so no placeholder can survive into a rendered prompt.
    """
    values = {("a*" if k == "a_star" else k): v for k, v in slots.items()}
    return _SLOT.sub(lambda m: values[m.group(1)], template)


def skeleton(template: str) -> list[str]:
    """Literal segments between (and around) the slots of ``template``."""
    return _SLOT.split(template)[::2]


def _require_answer(answer: Answer, what: str) -> None:
    if not answer.text.strip():
        raise InvalidAnswer(f"{what} answer text is empty")


def render_initial(q: Query) -> PromptText:
    # The bare question is the prompt: no preamble, no system message.
    return PromptText(PromptKind.INITIAL_ANSWER, q.text)


def render_defect(q: Query, a: Answer) -> PromptText:
    _require_answer(a, "incumbent")
    return PromptText(PromptKind.DEFECT_ANALYSIS, fill(DEFECT_TEMPLATE, a=a.text, q=q.text))


def render_guided_optimization(q: Query, a: Answer, d: DefectReport | str) -> PromptText:
    _require_answer(a, "incumbent")
    defect = d.text if isinstance(d, DefectReport) else d
    if not defect.strip():
        raise MissingDefect("guided optimization needs a non-empty defect analysis")
    text = fill(GUIDED_OPTIMIZATION_TEMPLATE, a=a.text, q=q.text, d=defect)
    return PromptText(PromptKind.GUIDED_OPTIMIZATION, text)


def render_blind_optimization(q: Query, a: Answer) -> PromptText:
    _require_answer(a, "incumbent")
    return PromptText(PromptKind.BLIND_OPTIMIZATION, fill(BLIND_OPTIMIZATION_TEMPLATE, a=a.text, q=q.text))


def render_vote(q: Query, a_prev: Answer, a_new: Answer) -> PromptText:
    """Render the comparison prompt.

    The previous answer always fills the first slot, so the reply "1" means
    "keep the incumbent" and "2" means "take the candidate".
    """
    if a_prev.round >= a_new.round:
        raise OrderingError(f"previous answer (round {a_prev.round}) must precede candidate (round {a_new.round})")
    _require_answer(a_prev, "previous")
    _require_answer(a_new, "candidate")
    return PromptText(PromptKind.VOTE, fill(VOTE_TEMPLATE, q=q.text, a=a_prev.text, a_star=a_new.text))


def _skeleton_pattern(template: str) -> re.Pattern[str]:
    return re.compile(".+".join(re.escape(part) for part in skeleton(template)), re.DOTALL)


# Checked in this order; the first full match wins when user text happens to
# embed another template's skeleton.
_CLASSIFIERS: tuple[tuple[PromptKind, re.Pattern[str]], ...] = tuple(
    (kind, _skeleton_pattern(TEMPLATES[kind]))
    for kind in (
        PromptKind.VOTE,
        PromptKind.GUIDED_OPTIMIZATION,
        PromptKind.BLIND_OPTIMIZATION,
        PromptKind.DEFECT_ANALYSIS,
    )
)


def classify(text: str) -> PromptKind:
    """Recover the kind of a rendered prompt; anything unrecognised is a question."""
    for kind, pattern in _CLASSIFIERS:
        if pattern.fullmatch(text):
            return kind
    return PromptKind.INITIAL_ANSWER
