"""Question generation and import.

Renders one of three paraphrased generation prompts over a rendered context,
parses the model's ordered-list reply into question records, and imports
externally authored question sets from a neutral JSONL format.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .corpus import ContextUnit, RenderedContext, segment_sentences, word_tokens
from .errors import DatasetImportError, GenerationParseError, ParseError
from .gateway import ChatRequest, Gateway, ModelSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PromptVariant:
    id: str
    template: str

    def __post_init__(self):
        if self.template.count("[N]") != 1:
            raise ValueError(f"prompt variant {self.id!r} must contain [N] exactly once")

    def render(self, n: int) -> str:
        return self.template.replace("[N]", str(n))


PROMPT_VARIANTS = {
    "v1": PromptVariant(
        "v1",
        "Generate [N] self-contained questions based on the following content in an ordered list.",
    ),
    "v2": PromptVariant(
        "v2",
        "Create [N] questions based on the following content in an ordered list.",
    ),
    "v3": PromptVariant(
        "v3",
        "Reference exclusively the content below to craft [N] independent questions. "
        "Format your output as an ordered list.",
    ),
}

RETRY_SUFFIX = "Output exactly {n} numbered items and nothing else."

# "1." / "1)" / "1:" at line start; the marker punctuation must be followed by
# whitespace (or end the line) so "1.5 miles" never reads as item 1.
ITEM_MARKER = re.compile(r"^\s*(\d+)[.):](?:\s+(.*))?$")


@dataclass
class QuestionRecord:
    id: str
    context_id: str | None
    source: dict
    text: str
    word_count: int
    golden_answer: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "context_id": self.context_id,
            "source": self.source,
            "text": self.text,
            "word_count": self.word_count,
            "golden_answer": self.golden_answer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuestionRecord":
        return cls(
            id=d["id"],
            context_id=d["context_id"],
            source=d["source"],
            text=d["text"],
            word_count=d["word_count"],
            golden_answer=d.get("golden_answer"),
        )


def dataset_label(record: QuestionRecord) -> str:
    """Grouping key for reports: imported name, or model@variant."""
    if "imported" in record.source:
        return _sanitize(record.source["imported"])
    gen = record.source["generated"]
    return _sanitize(f"{gen['model']}@{gen['prompt_variant']}")


def _sanitize(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._@-]+", "-", label)


def parse_ordered_list(text: str, expected_n: int) -> list[str]:
    """Parse "1. ..." / "1) ..." / "1: ..." items; lines without a marker
    continue the current item (joined with single spaces).

    Raises GenerationParseError when no markers are found, the numbering is
    not exactly 1..expected_n in order, or the item count is wrong.
    """
    numbers: list[int] = []
    items: list[list[str]] = []
    for line in text.splitlines():
        m = ITEM_MARKER.match(line)
        if m:
            numbers.append(int(m.group(1)))
            rest = (m.group(2) or "").strip()
            items.append([rest] if rest else [])
        elif items and line.strip():
            items[-1].append(line.strip())
    if not numbers:
        raise GenerationParseError("no numbered items found", raw=text)
    if numbers != list(range(1, len(numbers) + 1)):
        raise GenerationParseError(f"non-monotonic item numbering {numbers}", raw=text)
    if len(numbers) != expected_n:
        raise GenerationParseError(
            f"expected {expected_n} items, got {len(numbers)}", raw=text
        )
    return [" ".join(parts).strip() for parts in items]


def generate_questions(
    unit: RenderedContext,
    model: ModelSpec,
    variant: PromptVariant,
    n: int,
    gateway: Gateway,
) -> list[QuestionRecord]:
    """Ask for n questions over the rendered context and parse the reply.

    One corrective retry with a stricter instruction; after that the parse
    error (carrying the raw reply) propagates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    system = variant.render(n)
    reply = gateway.complete(ChatRequest(model=model, system=system, user=unit.rendered))
    try:
        texts = _parse_nonempty(reply.text, n)
    except ParseError as first_error:
        logger.warning("generation parse failed for %s, retrying: %s", unit.context_id, first_error)
        strict_system = f"{system} {RETRY_SUFFIX.format(n=n)}"
        retry = gateway.complete(ChatRequest(model=model, system=strict_system, user=unit.rendered))
        texts = _parse_nonempty(retry.text, n)
    records = []
    for k, text in enumerate(texts, 1):
        records.append(
            QuestionRecord(
                id=f"{unit.context_id}:{model.name}:{variant.id}:q{k}",
                context_id=unit.context_id,
                source={"generated": {"model": model.name, "prompt_variant": variant.id}},
                text=text,
                word_count=len(word_tokens(text)),
            )
        )
    return records


def _parse_nonempty(text: str, n: int) -> list[str]:
    items = parse_ordered_list(text, n)
    for k, item in enumerate(items, 1):
        if not item:
            raise GenerationParseError(f"item {k} is empty", raw=text)
    return items


@dataclass
class ImportedSet:
    """Questions from an external JSONL file plus synthetic contexts for the
    records that carried their own context paragraph."""

    questions: list[QuestionRecord] = field(default_factory=list)
    contexts: list[ContextUnit] = field(default_factory=list)


def import_questions(path: str, dataset_name: str) -> ImportedSet:
    """Load a JSONL file of {question, context?, golden_answer?} records.

    Records with a context get a synthetic sentence-segmented ContextUnit so
    coverage and answer metrics can run on them; records without one keep
    context_id=null and are skipped by context-dependent metrics.
    """
    result = ImportedSet()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetImportError(f"{path} line {lineno}: invalid JSON ({exc})") from exc
            question = row.get("question")
            if not isinstance(question, str) or not question.strip():
                raise DatasetImportError(f"{path} line {lineno}: missing 'question' field")
            question = " ".join(word_tokens(question))
            context_id = None
            context = row.get("context")
            if isinstance(context, str) and context.strip():
                text = " ".join(word_tokens(context))
                context_id = f"{dataset_name}:ctx{lineno:06d}"
                result.contexts.append(
                    ContextUnit(
                        id=context_id,
                        doc_title=dataset_name,
                        section_path=[],
                        text=text,
                        sentences=segment_sentences(text),
                        word_count=len(word_tokens(text)),
                    )
                )
            golden = row.get("golden_answer")
            result.questions.append(
                QuestionRecord(
                    id=f"{dataset_name}:q{lineno:06d}",
                    context_id=context_id,
                    source={"imported": dataset_name},
                    text=question,
                    word_count=len(word_tokens(question)),
                    golden_answer=golden if isinstance(golden, str) else None,
                )
            )
    return result
