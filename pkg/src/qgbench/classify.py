"""Question-type classification via a judge model.

Ten fixed categories plus an Others escape. The judge is constrained to
reply with a bare category code, and the first code-shaped token in the
reply is taken.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .errors import ClassificationParseError, ParseError
from .gateway import ChatRequest, Gateway, ModelSpec
from .question_gen import QuestionRecord

logger = logging.getLogger(__name__)

TYPE_LABELS = {
    "T1": "Identity/Attribution",
    "T2": "General Knowledge",
    "T3": "Location",
    "T4": "Classification/Categorization",
    "T5": "Specific Fact/Figure",
    "T6": "Comparison/Selection",
    "T7": "Verification/Affirmation",
    "T8": "Descriptive/Characterization",
    "T9": "Event/Outcome",
    "T10": "Sequential/Ordering/Causation",
    "OTHERS": "Others",
}
TYPE_CODES = list(TYPE_LABELS)

# Fixed three-way grouping used by the length/answer-length breakdowns.
TYPE_GROUPS = {
    "T1-T5": ["T1", "T2", "T3", "T4", "T5"],
    "T6-T7": ["T6", "T7"],
    "T8-T10": ["T8", "T9", "T10"],
}

_CATEGORY_DEFINITIONS = """\
T1. Identity and Attribution Questions: These inquiries focus on identifying a person or entity responsible for an action or associated with a work. They tend to ask "Who...?" or refer to persons or origins related to a context.
T2. Which/What-Based General Knowledge Questions: This group contains questions that start with "Which" or "What" and inquire about general knowledge, often requiring a selection from a set or identification of a type/category.
T3. Location-Based Questions: These questions focus on identifying a geographic location or specific place where something is based or occurs.
T4. Classification and Categorization Questions: These inquiries request the classification or categorical identity of entities or things, often seeking to place an item within a broader group or category.
T5. Specific Fact and Figure Questions: These questions request a specific quantitative or qualitative fact. They are straightforward and seek concrete data or a precise answer, often involving numbers or specific details.
T6. Comparison and Selection Questions: Questions in this group involve comparing two entities to determine which one holds a particular status or characteristic, often using formats like "Between X and Y, who/which is...?"
T7. Verification/Affirmation Questions: These questions ask for confirmation about the equivalence or relationship between two or more entities. They often use formats like "Are...?" or "Which...?"
T8. Descriptive/Characterization Questions: These questions seek an explanation or characterization of entities, often requiring a description of how or why something is the way it is, involving traits or actions.
T9. Event/Outcome Questions: These questions inquire about the outcome of specific events or actions, focusing on consequences or results. They often address changes, damages, or effects.
T10. Sequential/Ordering/Causation Questions: These questions require identifying a sequence, comparison, or causation among entities, often using terms like "first," "before," "between," etc.
OTHERS: The question does not fit any of the categories above."""

CLASSIFY_SYSTEM = (
    "Classify the question into exactly one of the following categories.\n\n"
    f"{_CATEGORY_DEFINITIONS}\n\n"
    "Output only the category code (T1-T10 or OTHERS) on a single line."
)

RETRY_SUFFIX = "Respond with only the category code and nothing else."

CODE_RE = re.compile(r"\b(T(?:10|[1-9])|OTHERS)\b", re.IGNORECASE)


@dataclass
class TypeAssignment:
    question_id: str
    qtype: str
    raw_judge_output: str

    def __post_init__(self):
        if self.qtype not in TYPE_LABELS:
            raise ValueError(f"unknown question type {self.qtype!r}")

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "qtype": self.qtype,
            "raw_judge_output": self.raw_judge_output,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TypeAssignment":
        return cls(d["question_id"], d["qtype"], d["raw_judge_output"])


def extract_code(reply: str) -> str:
    """First token matching a category code, normalized to upper case."""
    m = CODE_RE.search(reply)
    if not m:
        raise ClassificationParseError("no category code in judge reply", raw=reply)
    return m.group(1).upper()


def classify_question(q: QuestionRecord, judge: ModelSpec, gateway: Gateway) -> TypeAssignment:
    reply = gateway.complete(ChatRequest(model=judge, system=CLASSIFY_SYSTEM, user=q.text))
    try:
        code = extract_code(reply.text)
        raw = reply.text
    except ParseError:
        logger.warning("classification parse failed for %s, retrying", q.id)
        retry = gateway.complete(
            ChatRequest(model=judge, system=f"{CLASSIFY_SYSTEM} {RETRY_SUFFIX}", user=q.text)
        )
        code = extract_code(retry.text)
        raw = retry.text
    return TypeAssignment(question_id=q.id, qtype=code, raw_judge_output=raw)


def type_distribution(assignments: list[TypeAssignment]) -> dict[str, float]:
    """Percentage per category code over all assignments; zeros included."""
    if not assignments:
        raise ValueError("type_distribution of empty assignment list")
    total = len(assignments)
    counts = {code: 0 for code in TYPE_CODES}
    for a in assignments:
        counts[a.qtype] += 1
    return {code: 100.0 * count / total for code, count in counts.items()}


def group_shares(distribution: dict[str, float]) -> dict[str, float]:
    """Sum the distribution over the fixed three-way grouping."""
    return {
        group: sum(distribution.get(code, 0.0) for code in members)
        for group, members in TYPE_GROUPS.items()
    }


def group_of(code: str) -> str | None:
    for group, members in TYPE_GROUPS.items():
        if code in members:
            return group
    return None
