"""Prompt template sets, keyed by model family.

Template sets are plain data so new model families can be registered
without touching the engine. The debate prompt embeds every prior-turn
response verbatim under a fixed anonymous label in agent-index order,
including the agent's own.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class TemplateSet:
    template_id: str
    system: str
    opening: str  # fields: question
    debate_header: str  # fields: question, count, count_word
    peer_line: str  # fields: index, text
    debate_footer: str


_OPENING = (
    "{question}\n"
    "Let's think step by step and output the final answer within \\boxed{{}}."
)

_DEBATE_HEADER = "Given the following problem: {question}. We have {count_word} answers:\n"

_PEER_LINE = " agent {index} response is: {text}\n"

_DEBATE_FOOTER = (
    " Please carefully review these answers and recognize which one is right. "
    "If one or all of them are right, please summarize the reasoning process of "
    "the right one and give the final answer. If {all_word} of them are wrong, "
    "please correct their mistakes and provide a novel and complete solution to "
    "the problem and give the final answer. Let's think step by step and output "
    "the final answer within \\boxed{{}}."
)

TEMPLATE_SETS: dict[str, TemplateSet] = {}


def register_template_set(ts: TemplateSet) -> None:
    if not ts.template_id:
        raise ValidationError("template_id must be non-empty")
    TEMPLATE_SETS[ts.template_id] = ts


def get_template_set(template_id: str) -> TemplateSet:
    try:
        return TEMPLATE_SETS[template_id]
    except KeyError:
        raise ValidationError(f"unknown template set {template_id!r}") from None


register_template_set(
    TemplateSet(
        template_id="default",
        system="You are a helpful assistant.",
        opening=_OPENING,
        debate_header=_DEBATE_HEADER,
        peer_line=_PEER_LINE,
        debate_footer=_DEBATE_FOOTER,
    )
)

register_template_set(
    TemplateSet(
        template_id="qwen",
        system="You are Qwen, created by Alibaba Cloud. You are a helpful assistant.",
        opening=_OPENING,
        debate_header=_DEBATE_HEADER,
        peer_line=_PEER_LINE,
        debate_footer=_DEBATE_FOOTER,
    )
)


def count_word(n: int) -> str:
    words = {2: "two", 3: "three", 4: "four", 5: "five", 6: "six"}
    return words.get(n, str(n))


def all_word(n: int) -> str:
    return "both" if n == 2 else "all"


def render_opening(ts: TemplateSet, question: str) -> str:
    return ts.opening.format(question=question)


def render_debate(ts: TemplateSet, question: str, peer_texts: list[str]) -> str:
    n = len(peer_texts)
    parts = [ts.debate_header.format(question=question, count=n, count_word=count_word(n))]
    for index, text in enumerate(peer_texts):
        parts.append(ts.peer_line.format(index=index, text=text))
    parts.append(ts.debate_footer.format(all_word=all_word(n)))
    return "".join(parts)
