"""Answer generation, 0-5 rating, and rating-preserving answer shortening.

Answers are generated with and without the source context; shortened
variants (a concise rewrite plus hard word limits) are generated with
context only. The judge always sees the context when the question has one,
whatever the answer's generation mode. A shorter variant whose rating is at
least the base rating counts as sufficient; the shortest such variant's
length is the required answer length.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .corpus import RenderedContext, word_tokens
from .errors import EmptyAnswerError, ParseError, RatingParseError
from .gateway import ChatRequest, Gateway, ModelSpec
from .question_gen import QuestionRecord

logger = logging.getLogger(__name__)

WITH_CONTEXT = "with_context"
WITHOUT_CONTEXT = "without_context"

BASE = "base"
CONCISE = "concise"
DEFAULT_WORD_LIMITS = [1, 2, 3, 4, 8]

ANSWER_SYSTEM = (
    "You are to generate a short answer based on the following question "
    "and an optional supporting fact."
)
CONCISE_SUFFIX = "Provide a very concise answer without repeating the question."
LIMIT_SUFFIX = "Please ensure that your answer contains no more than {x} words."

RATING_SYSTEM = """\
You are to rate the following answer to a question, taking into account any optional supporting facts provided.

Assign a rating from 0 to 5 based on the criteria below:

0: No answer or completely irrelevant
1: Significantly incorrect or incomplete
2: Partially correct; major inaccuracies or omissions
3: Correct but lacks depth; minimal detail
4: Mostly correct; minor errors; includes relevant details
5: Fully accurate and detailed; clear and comprehensive

Your response should consist of two lines:
The rating from 0 to 5.
A brief justification for your rating."""

RATING_RETRY_SUFFIX = "The first line must be a single integer from 0 to 5."

_INT_RE = re.compile(r"-?\d+")


def limit_variant(x: int) -> str:
    return f"limit_{x}"


def variant_limit(variant: str) -> int | None:
    if variant.startswith("limit_"):
        return int(variant.split("_", 1)[1])
    return None


def all_variants(word_limits: list[int] | None = None) -> list[str]:
    limits = DEFAULT_WORD_LIMITS if word_limits is None else word_limits
    return [BASE, CONCISE] + [limit_variant(x) for x in limits]


@dataclass
class AnswerRecord:
    question_id: str
    mode: str  # with_context / without_context
    variant: str  # base / concise / limit_<x>
    text: str
    word_count: int

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "mode": self.mode,
            "variant": self.variant,
            "text": self.text,
            "word_count": self.word_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnswerRecord":
        return cls(d["question_id"], d["mode"], d["variant"], d["text"], d["word_count"])


@dataclass
class Rating:
    score: int
    justification: str

    def __post_init__(self):
        if not 0 <= self.score <= 5:
            raise ValueError(f"score {self.score} outside 0..5")


@dataclass
class ShorteningResult:
    question_id: str
    original_len: int
    shortened_len: int
    chosen_variant: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "original_len": self.original_len,
            "shortened_len": self.shortened_len,
            "chosen_variant": self.chosen_variant,
        }


def _answer_system(variant: str) -> str:
    if variant == BASE:
        return ANSWER_SYSTEM
    if variant == CONCISE:
        return f"{ANSWER_SYSTEM}\n{CONCISE_SUFFIX}"
    limit = variant_limit(variant)
    if limit is None:
        raise ValueError(f"unknown answer variant {variant!r}")
    return f"{ANSWER_SYSTEM}\n{LIMIT_SUFFIX.format(x=limit)}"


def _user_prompt(q: QuestionRecord, unit: RenderedContext | None, answer: str | None = None) -> str:
    parts = []
    if unit is not None:
        parts.append(f"Supporting fact:\n{unit.rendered}")
    parts.append(f"Question: {q.text}")
    if answer is not None:
        parts.append(f"Answer: {answer}")
    return "\n\n".join(parts)


def generate_answer(
    q: QuestionRecord,
    unit: RenderedContext | None,
    variant: str,
    answerer: ModelSpec,
    gateway: Gateway,
) -> AnswerRecord:
    """Generate one answer variant. Shortening variants require a context."""
    if variant != BASE and unit is None:
        raise ValueError(f"variant {variant} requires a context")
    reply = gateway.complete(
        ChatRequest(model=answerer, system=_answer_system(variant), user=_user_prompt(q, unit))
    )
    text = reply.text.strip()
    if not text:
        raise EmptyAnswerError(f"empty answer for question {q.id} ({variant})")
    return AnswerRecord(
        question_id=q.id,
        mode=WITH_CONTEXT if unit is not None else WITHOUT_CONTEXT,
        variant=variant,
        text=text,
        word_count=len(word_tokens(text)),
    )


def parse_rating(reply: str) -> Rating:
    """First integer on the first non-empty line; the rest is justification."""
    lines = reply.splitlines()
    for i, line in enumerate(lines):
        if line.strip():
            m = _INT_RE.search(line)
            if m is None:
                raise RatingParseError(f"no integer on first line: {line!r}", raw=reply)
            score = int(m.group(0))
            if not 0 <= score <= 5:
                raise RatingParseError(f"score {score} outside 0..5", raw=reply)
            justification = "\n".join(ln.strip() for ln in lines[i + 1 :] if ln.strip())
            return Rating(score=score, justification=justification)
    raise RatingParseError("empty rating reply", raw=reply)


def rate_answer(
    q: QuestionRecord,
    a: AnswerRecord,
    unit: RenderedContext | None,
    judge: ModelSpec,
    gateway: Gateway,
) -> Rating:
    """Rate an answer on the 0-5 rubric.

    The judge sees the rendered context whenever the question has one,
    regardless of how the answer was generated.
    """
    user = _user_prompt(q, unit, answer=a.text)
    reply = gateway.complete(ChatRequest(model=judge, system=RATING_SYSTEM, user=user))
    try:
        return parse_rating(reply.text)
    except ParseError:
        logger.warning("rating parse failed for %s (%s/%s), retrying", q.id, a.mode, a.variant)
        retry = gateway.complete(
            ChatRequest(model=judge, system=f"{RATING_SYSTEM}\n{RATING_RETRY_SUFFIX}", user=user)
        )
        return parse_rating(retry.text)


def _tie_rank(variant: str) -> tuple[int, int]:
    limit = variant_limit(variant)
    if limit is not None:
        return (0, limit)
    if variant == CONCISE:
        return (1, 0)
    return (2, 0)


def shortened_length(
    q: QuestionRecord,
    base: tuple[AnswerRecord, Rating],
    variants: list[tuple[AnswerRecord, Rating]],
) -> ShorteningResult:
    """Shortest answer whose rating is at least the base answer's rating.

    Ties on word count prefer the smallest word limit, then the concise
    rewrite, then the base answer.
    """
    base_answer, base_rating = base
    if base_rating is None or any(r is None for _, r in variants):
        raise ValueError("all answers must be rated before shortening")
    if base_answer.mode != WITH_CONTEXT:
        raise ValueError("shortening is defined for answers generated with context")
    for a, _ in variants:
        if a.question_id != base_answer.question_id:
            raise ValueError("variant answers must share the base answer's question_id")
    candidates = [(base_answer, base_rating)]
    candidates += [(a, r) for a, r in variants if r.score >= base_rating.score]
    chosen, _ = min(candidates, key=lambda ar: (ar[0].word_count, _tie_rank(ar[0].variant)))
    return ShorteningResult(
        question_id=base_answer.question_id,
        original_len=base_answer.word_count,
        shortened_len=chosen.word_count,
        chosen_variant=chosen.variant,
    )


@dataclass
class RatingHistogram:
    percentages: dict[int, float]  # score 0..5 -> share
    unanswered_share: float  # share of scores at or below the threshold


def answerability_histogram(ratings: list[Rating], unanswered_threshold: int = 2) -> RatingHistogram:
    """Score distribution plus the share of answers not properly answered."""
    if not ratings:
        raise ValueError("answerability_histogram of empty rating list")
    counts = {s: 0 for s in range(6)}
    for r in ratings:
        counts[r.score] += 1
    total = len(ratings)
    percentages = {s: 100.0 * c / total for s, c in counts.items()}
    unanswered = 100.0 * sum(1 for r in ratings if r.score <= unanswered_threshold) / total
    return RatingHistogram(percentages=percentages, unanswered_share=unanswered)
