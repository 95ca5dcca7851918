"""Context coverage: which sentences a question draws on, and where they sit.

The judge picks the minimal relevant sentence set from a numbered listing;
from that selection we derive sentence-level and word-level coverage plus
the set of decile buckets (ten equal word-range regions) the selected
sentences touch.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .corpus import ContextUnit
from .errors import CoverageParseError, ParseError
from .gateway import ChatRequest, Gateway, ModelSpec
from .question_gen import QuestionRecord

logger = logging.getLogger(__name__)

N_BUCKETS = 10

COVERAGE_SYSTEM = (
    "Select the minimal set of context sentences most relevant to answering the question. "
    "You need to choose at least one sentence and can select multiple sentences. "
    "Output only the sentence numbers of these sentences in a comma-separated list "
    "on a single line without any additional text."
)


@dataclass
class CoverageRecord:
    question_id: str
    selected_sentences: list[int]  # sorted, 1-based
    pct_covered_sentences: float
    pct_covered_words: float
    buckets_touched: list[int]  # sorted subset of 0..9

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "selected_sentences": self.selected_sentences,
            "pct_covered_sentences": self.pct_covered_sentences,
            "pct_covered_words": self.pct_covered_words,
            "buckets_touched": self.buckets_touched,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoverageRecord":
        return cls(
            question_id=d["question_id"],
            selected_sentences=list(d["selected_sentences"]),
            pct_covered_sentences=d["pct_covered_sentences"],
            pct_covered_words=d["pct_covered_words"],
            buckets_touched=list(d["buckets_touched"]),
        )


def sentence_listing(unit: ContextUnit) -> str:
    return "\n".join(f"{i}. {span.text}" for i, span in enumerate(unit.sentences, 1))


def parse_selection(reply: str, n_sentences: int) -> set[int]:
    """Parse the first non-empty line as comma-separated 1-based indices."""
    line = next((ln.strip() for ln in reply.splitlines() if ln.strip()), "")
    if not line:
        raise CoverageParseError("empty selection reply", raw=reply)
    try:
        indices = {int(part.strip()) for part in line.split(",")}
    except ValueError as exc:
        raise CoverageParseError(f"selection line is not comma-separated integers: {line!r}", raw=reply) from exc
    bad = [i for i in indices if i < 1 or i > n_sentences]
    if bad:
        raise CoverageParseError(f"selection indices {sorted(bad)} outside [1, {n_sentences}]", raw=reply)
    return indices


def select_relevant_sentences(
    q: QuestionRecord, unit: ContextUnit, judge: ModelSpec, gateway: Gateway
) -> set[int]:
    """Judge-selected minimal sentence set; single-sentence contexts are
    forced to {1} without a call. One corrective retry on a bad reply."""
    n = len(unit.sentences)
    if n == 0:
        raise ValueError(f"context {unit.id} has no sentences")
    if n == 1:
        return {1}
    user = f"{sentence_listing(unit)}\n\nQuestion: {q.text}"
    reply = gateway.complete(ChatRequest(model=judge, system=COVERAGE_SYSTEM, user=user))
    try:
        return parse_selection(reply.text, n)
    except ParseError:
        logger.warning("coverage parse failed for %s, retrying", q.id)
        strict = f"{COVERAGE_SYSTEM} Output only integers between 1 and {n} separated by commas."
        retry = gateway.complete(ChatRequest(model=judge, system=strict, user=user))
        return parse_selection(retry.text, n)


def coverage_metrics(selected: set[int], unit: ContextUnit, question_id: str = "") -> CoverageRecord:
    """Derive coverage percentages and touched buckets from a selection.

    A sentence touches every bucket between the buckets of its first and
    last word index, so a span crossing a decile boundary counts for both
    sides.
    """
    n = len(unit.sentences)
    if not selected:
        raise ValueError("selection must be non-empty")
    if any(i < 1 or i > n for i in selected):
        raise ValueError(f"selection {sorted(selected)} invalid for {n} sentences")
    covered_words = sum(unit.sentences[i - 1].end - unit.sentences[i - 1].start for i in selected)
    buckets: set[int] = set()
    for i in selected:
        span = unit.sentences[i - 1]
        first = min(N_BUCKETS - 1, N_BUCKETS * span.start // unit.word_count)
        last = min(N_BUCKETS - 1, N_BUCKETS * (span.end - 1) // unit.word_count)
        buckets.update(range(first, last + 1))
    return CoverageRecord(
        question_id=question_id,
        selected_sentences=sorted(selected),
        pct_covered_sentences=100.0 * len(selected) / n,
        pct_covered_words=100.0 * covered_words / unit.word_count,
        buckets_touched=sorted(buckets),
    )


def bucket_frequencies(records: list[CoverageRecord]) -> list[float]:
    """Share of records touching each bucket; columns are independent and
    need not sum to 100."""
    if not records:
        raise ValueError("bucket_frequencies of empty record list")
    counts = [0] * N_BUCKETS
    for record in records:
        for b in set(record.buckets_touched):
            counts[b] += 1
    return [100.0 * c / len(records) for c in counts]
