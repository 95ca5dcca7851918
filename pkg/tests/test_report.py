import math
import random
import statistics

import pytest
from hypothesis import given, strategies as st

from qgbench.classify import TypeAssignment
from qgbench.corpus import ContextUnit, SentenceSpan
from qgbench.coverage import CoverageRecord
from qgbench.errors import IntegrityError
from qgbench.question_gen import QuestionRecord
from qgbench.report import (
    TABLE_NAMES,
    build_report,
    mean_std,
    pearson,
    write_report_dir,
)


class TestMeanStd:
    def test_constant_list(self):
        assert mean_std([5, 5, 5]) == (5.0, 0.0)

    def test_two_values(self):
        mean, std = mean_std([1, 3])
        assert mean == 2.0
        assert std == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_singleton(self):
        assert mean_std([7.5]) == (7.5, 0.0)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            mean_std([])

    def test_against_two_pass_oracle(self):
        rng = random.Random(42)
        for _ in range(100):
            n = rng.randint(2, 50)
            values = [rng.uniform(-1000, 1000) for _ in range(n)]
            mean, std = mean_std(values)
            assert mean == pytest.approx(statistics.mean(values), abs=1e-9)
            assert std == pytest.approx(statistics.stdev(values), abs=1e-9)


class TestPearson:
    def test_identity(self):
        assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0, abs=1e-12)

    def test_antisymmetry(self):
        assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_computed(self):
        assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=1e-5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(ValueError):
            pearson([1], [1])

    def test_zero_variance(self):
        with pytest.raises(ValueError):
            pearson([1, 1, 1], [1, 2, 3])

    @given(
        st.lists(st.integers(min_value=-50, max_value=50), min_size=3, max_size=20),
        st.integers(min_value=1, max_value=9),
        st.integers(min_value=-20, max_value=20),
    )
    def test_positive_affine_invariance(self, xs, a, b):
        ys = list(range(len(xs)))
        if len(set(xs)) < 2:
            return
        r = pearson(xs, ys)
        assert pearson([a * x + b for x in xs], ys) == pytest.approx(r, abs=1e-9)
        assert pearson([-a * x + b for x in xs], ys) == pytest.approx(-r, abs=1e-9)


def make_context(cid, n_sentences=4, words_per=5):
    spans = []
    for i in range(n_sentences):
        start = i * words_per
        text = " ".join(f"w{start + j}" for j in range(words_per)) + "."
        spans.append(SentenceSpan(start, start + words_per, text))
    return ContextUnit(
        id=cid,
        doc_title="Doc",
        section_path=[],
        text=" ".join(s.text for s in spans),
        sentences=spans,
        word_count=n_sentences * words_per,
    )


def make_fixture(n_questions=8, label_model="m1", golden=False):
    contexts = {}
    questions = []
    assignments = []
    coverage_records = []
    rating_rows = []
    shortening_rows = []
    answer_rows = []
    types = ["T1", "T5", "T8", "T9"]
    for i in range(n_questions):
        cid = f"c{i}"
        contexts[cid] = make_context(cid)
        qid = f"{cid}:{label_model}:v1:q1"
        questions.append(
            QuestionRecord(
                id=qid,
                context_id=cid,
                source={"generated": {"model": label_model, "prompt_variant": "v1"}},
                text=f"What is detail number {i} about?",
                word_count=6,
                golden_answer="short gold" if golden else None,
            )
        )
        assignments.append(TypeAssignment(qid, types[i % 4], types[i % 4]))
        coverage_records.append(
            CoverageRecord(
                question_id=qid,
                selected_sentences=[1 + (i % 4)],
                pct_covered_sentences=25.0,
                pct_covered_words=25.0,
                buckets_touched=[i % 10],
            )
        )
        for mode in ("with_context", "without_context"):
            rating_rows.append(
                {
                    "question_id": qid,
                    "mode": mode,
                    "variant": "base",
                    "score": 5 if mode == "with_context" else (i % 6),
                    "justification": "",
                }
            )
        answer_rows.append(
            {
                "question_id": qid,
                "mode": "with_context",
                "variant": "base",
                "text": "x " * (10 + i),
                "word_count": 10 + i,
            }
        )
        shortening_rows.append(
            {
                "question_id": qid,
                "original_len": 10 + i,
                "shortened_len": 2 + (i % 3),
                "chosen_variant": "limit_2",
            }
        )
    return dict(
        questions=questions,
        contexts=contexts,
        assignments=assignments,
        coverage_records=coverage_records,
        rating_rows=rating_rows,
        shortening_rows=shortening_rows,
        answer_rows=answer_rows,
    )


class TestBuildReport:
    def test_structural(self):
        reports = build_report(**make_fixture(16))
        assert len(reports) == 1
        report = reports[0]
        assert report.n_questions == 16
        assert report.dataset_label == "m1@v1"
        for name in TABLE_NAMES:
            assert name in report.tables
            assert report.tables[name].startswith(report.tables[name].splitlines()[0])

    def test_deterministic(self):
        a = build_report(**make_fixture(8))
        b = build_report(**make_fixture(8))
        assert [r.tables for r in a] == [r.tables for r in b]

    def test_dangling_reference(self):
        fixture = make_fixture(4)
        fixture["rating_rows"].append(
            {"question_id": "ghost", "mode": "with_context", "variant": "base", "score": 3, "justification": ""}
        )
        with pytest.raises(IntegrityError, match="ghost"):
            build_report(**fixture)

    def test_grouping_by_variant(self):
        fixture = make_fixture(4)
        other = make_fixture(4, label_model="m1")
        for q in other["questions"]:
            q.id = q.id.replace(":v1:", ":v2:")
            q.source = {"generated": {"model": "m1", "prompt_variant": "v2"}}
        for coll, key in [
            ("assignments", "question_id"),
            ("coverage_records", "question_id"),
        ]:
            for rec in other[coll]:
                rec.question_id = rec.question_id.replace(":v1:", ":v2:")
        for coll in ("rating_rows", "shortening_rows", "answer_rows"):
            for rec in other[coll]:
                rec["question_id"] = rec["question_id"].replace(":v1:", ":v2:")
        merged = {
            key: (fixture[key] | other[key]) if key == "contexts" else fixture[key] + other[key]
            for key in fixture
        }
        reports = build_report(**merged)
        assert [r.dataset_label for r in reports] == ["m1@v1", "m1@v2"]

    def test_golden_row_present(self):
        reports = build_report(**make_fixture(4, golden=True))
        table = reports[0].tables["answer_lengths"]
        assert any(line.startswith("golden,4,2.0") for line in table.splitlines())

    def test_type_distribution_table(self):
        reports = build_report(**make_fixture(8))
        lines = reports[0].tables["type_distribution"].splitlines()
        assert lines[0] == "code,name,percent"
        row = {ln.split(",")[0]: ln for ln in lines[1:]}
        assert row["T1"] == "T1,Identity/Attribution,25.0"
        assert row["T8-T10"] == "T8-T10,Group,50.0"

    def test_rating_histogram_table(self):
        reports = build_report(**make_fixture(8))
        lines = reports[0].tables["rating_histograms"].splitlines()
        with_row = next(ln for ln in lines if ln.startswith("with_context"))
        assert with_row.split(",")[1] == "8"
        assert with_row.endswith("0.0")  # everything rated 5 -> nothing unanswered

    def test_group_weighted_mean_consistency(self):
        fixture = make_fixture(12)
        reports = build_report(**fixture)
        lines = reports[0].tables["length_stats"].splitlines()[1:]
        cells = [ln.split(",") for ln in lines]
        overall = next(c for c in cells if c[0] == "overall")
        groups = [c for c in cells if c[0] != "overall" and c[1] != "0"]
        weighted = sum(int(c[1]) * float(c[3]) for c in groups) / sum(int(c[1]) for c in groups)
        assert weighted == pytest.approx(float(overall[3]), abs=0.1)

    def test_empty_questions_rejected(self):
        with pytest.raises(ValueError):
            build_report([], {}, [], [], [], [], [])


def test_write_report_dir(tmp_path):
    reports = build_report(**make_fixture(4))
    write_report_dir(reports, tmp_path / "report", extra={"failures": {}})
    label_dir = tmp_path / "report" / "m1@v1"
    for name in TABLE_NAMES:
        assert (label_dir / f"{name}.csv").exists()
    assert (label_dir / "shortening_distributions.csv").exists()
    assert (label_dir / "answer_length_summary.csv").read_text() == (
        label_dir / "answer_lengths.csv"
    ).read_text()
    summary = (tmp_path / "report" / "summary.json").read_text()
    assert '"m1@v1"' in summary
    assert '"failures"' in summary
