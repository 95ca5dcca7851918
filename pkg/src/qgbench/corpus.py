"""WikiText-style corpus ingestion.

Turns a heading-structured dump into cleaned, sentence-segmented paragraph
contexts. Headings ('='-fenced lines, depth = number of '=' marks) become
document titles (depth 1) and section paths (depth 2+); everything else is
paragraph text. A "word" throughout the pipeline is a maximal
whitespace-separated token.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple

from .errors import EmptyCorpusError

logger = logging.getLogger(__name__)

# WikiText escape tokens; the surrounding spaces belong to the escape, so
# "well @-@ known" collapses back to "well-known".
ESCAPE_TOKENS = {"@-@": "-", "@.@": ".", "@,@": ","}

SENTENCE_TERMINALS = ".!?"
OPENING_QUOTES = set("\"'") | {"“", "‘", "«"}  # " ' left-quotes, guillemet


class SentenceSpan(NamedTuple):
    """Half-open word-index span [start, end) plus the sentence text."""

    start: int
    end: int
    text: str


@dataclass
class ContextUnit:
    """One cleaned paragraph with its section metadata and sentence spans."""

    id: str
    doc_title: str
    section_path: list[str]
    text: str
    sentences: list[SentenceSpan]
    word_count: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "doc_title": self.doc_title,
            "section_path": list(self.section_path),
            "text": self.text,
            "sentences": [list(s) for s in self.sentences],
            "word_count": self.word_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContextUnit":
        return cls(
            id=d["id"],
            doc_title=d["doc_title"],
            section_path=list(d["section_path"]),
            text=d["text"],
            sentences=[SentenceSpan(s[0], s[1], s[2]) for s in d["sentences"]],
            word_count=d["word_count"],
        )


@dataclass(frozen=True)
class RenderedContext:
    """Paragraph text plus a deterministic metadata trailer line."""

    context_id: str
    rendered: str


def word_tokens(text: str) -> list[str]:
    """The pipeline-wide word definition: maximal whitespace-separated tokens."""
    return text.split()


def clean_text(raw: str) -> str:
    """Replace escape tokens and collapse whitespace to single spaces."""
    text = raw
    for token, repl in ESCAPE_TOKENS.items():
        text = text.replace(f" {token} ", repl)
        text = text.replace(token, repl)  # token at a line edge
    return " ".join(text.split())


def _is_initial(token: str) -> bool:
    # Single uppercase letter followed by a period, e.g. the F. in John F. Kennedy.
    return len(token) == 2 and token[1] == "." and token[0].isalpha() and token[0].isupper()


def segment_sentences(text: str) -> list[SentenceSpan]:
    """Split cleaned text into sentence spans over its word tokens.

    A boundary falls after a token ending in '.', '!' or '?' when the next
    token starts with an uppercase letter, an opening quote, or a digit.
    Initials ("F.") never end a sentence, and a period inside a token
    ("3.5") is not a terminator. Trailing words without terminal
    punctuation form a final sentence.
    """
    tokens = word_tokens(text)
    if not tokens:
        raise ValueError("cannot segment empty text")
    boundaries = []
    for i in range(len(tokens) - 1):
        token = tokens[i]
        if token[-1] not in SENTENCE_TERMINALS:
            continue
        if token[-1] == "." and _is_initial(token):
            continue
        first = tokens[i + 1][0]
        if first.isupper() or first.isdigit() or first in OPENING_QUOTES:
            boundaries.append(i + 1)
    spans = []
    start = 0
    for end in boundaries + [len(tokens)]:
        if end > start:
            spans.append(SentenceSpan(start, end, " ".join(tokens[start:end])))
            start = end
    return spans


def render_context(unit: ContextUnit) -> RenderedContext:
    """Paragraph text verbatim, then a 'Section:' line naming title and path."""
    trailer = "Section: " + " > ".join([unit.doc_title] + list(unit.section_path))
    return RenderedContext(context_id=unit.id, rendered=f"{unit.text}\n{trailer}")


def _parse_heading(line: str) -> tuple[int, str] | None:
    """Return (depth, title) for '='-fenced heading lines, else None.

    Accepts both the spaced WikiText form ("= = Career = =") and the compact
    form ("== Career =="); depth is the number of leading '=' marks.
    """
    stripped = line.strip()
    if len(stripped) < 2 or not stripped.startswith("=") or not stripped.endswith("="):
        return None
    if stripped[1] not in "= ":
        return None
    depth = 0
    for ch in stripped:
        if ch == "=":
            depth += 1
        elif ch != " ":
            break
    title = stripped.strip("= ").strip()
    return depth, title


@dataclass
class _DocState:
    # doc 0 is reserved for text before the first depth-1 heading
    doc_idx: int = 0
    par_idx: int = 0
    title: str = ""
    section_path: list[str] = field(default_factory=list)


def ingest_dump(
    dump_stream: IO[str] | Iterable[str],
    min_words: int,
    max_contexts: int | None = None,
    seed: int = 0,
) -> list[ContextUnit]:
    """Stream a WikiText-style dump into filtered ContextUnits.

    Paragraphs are maximal runs of non-heading, non-blank lines; paragraphs
    shorter than min_words (after cleaning) are dropped. When max_contexts
    is set, a uniform random subsample of that size is drawn with the given
    seed, preserving corpus order. Raises EmptyCorpusError when nothing
    survives the filter.
    """
    units: list[ContextUnit] = []
    state = _DocState()
    buffer: list[str] = []
    n_seen = 0

    def flush() -> None:
        nonlocal n_seen
        if not buffer:
            return
        text = clean_text(" ".join(buffer))
        buffer.clear()
        n_seen += 1
        unit_id = f"d{state.doc_idx:05d}-p{state.par_idx:04d}"
        state.par_idx += 1
        tokens = word_tokens(text)
        if len(tokens) < min_words:
            return
        units.append(
            ContextUnit(
                id=unit_id,
                doc_title=state.title,
                section_path=list(state.section_path),
                text=text,
                sentences=segment_sentences(text),
                word_count=len(tokens),
            )
        )

    for line in dump_stream:
        heading = _parse_heading(line)
        if heading is not None:
            flush()
            depth, title = heading
            if depth <= 1:
                state.doc_idx += 1
                state.par_idx = 0
                state.title = title
                state.section_path = []
            else:
                state.section_path = state.section_path[: depth - 2] + [title]
            continue
        if not line.strip():
            flush()
            continue
        buffer.append(line.strip())
    flush()

    logger.info("ingested %d paragraphs, %d survive min_words=%d", n_seen, len(units), min_words)
    if not units:
        raise EmptyCorpusError(f"no paragraph met the {min_words}-word minimum ({n_seen} seen)")

    if max_contexts is not None and len(units) > max_contexts:
        rng = random.Random(seed)
        keep = sorted(rng.sample(range(len(units)), max_contexts))
        units = [units[i] for i in keep]
    return units
