import json
import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURE_CORPUS = Path(__file__).parent / "data" / "wikitext_fixture.txt"

# One scripted reply per call kind, discriminated by user-prompt substrings.
# Order matters: specific matches come before generic ones.
PIPELINE_MOCK_SCRIPT = [
    # rating of the (ungrounded) without-context answer
    {"match": "\n\nAnswer: A short mock answer", "response": "2\nMisses the context."},
    # rating of everything else
    {"match": "\n\nAnswer:", "response": "4\nReasonable and grounded."},
    # answer generation with supporting fact
    {"match": "Supporting fact:", "response": "A grounded mock answer"},
    # coverage sentence selection (numbered sentences + question)
    {"match": "\n\nQuestion:", "response": "1,2"},
    # question generation over a rendered context
    {
        "match": "\nSection:",
        "response": "1. What does the passage describe?\n2. Which detail is mentioned?",
    },
    # answer generation without supporting fact
    {"match": "Question:", "response": "A short mock answer"},
    # classification of the two generated question texts
    {"match": "What does the passage describe?", "response": "T8"},
    {"match": "", "response": "T5"},
]


@pytest.fixture
def mock_script(tmp_path):
    path = tmp_path / "mock_script.jsonl"
    path.write_text(
        "".join(json.dumps(e) + "\n" for e in PIPELINE_MOCK_SCRIPT), encoding="utf-8"
    )
    return path


@pytest.fixture
def workdir(tmp_path):
    corpus = tmp_path / "corpus.txt"
    shutil.copy(FIXTURE_CORPUS, corpus)
    return tmp_path


def make_config(
    workdir: Path,
    n_contexts: int = 8,
    questions_per_context: int = 2,
    **overrides,
) -> Path:
    config = {
        "corpus_path": str(workdir / "corpus.txt"),
        "cache_dir": str(workdir / "cache"),
        "output_dir": str(workdir / "out"),
        "models": [{"name": "mock-gen"}, {"name": "mock-judge"}],
        "judge": "mock-judge",
        "generators": ["mock-gen"],
        "prompt_variants": ["v1"],
        "n_contexts": n_contexts,
        "questions_per_context": questions_per_context,
        "seed": 0,
        "min_words": 50,
        "concurrency": 4,
    }
    config.update(overrides)
    path = workdir / "run_config.json"
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path
