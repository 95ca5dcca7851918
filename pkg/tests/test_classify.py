import pytest
from hypothesis import given, strategies as st

from qgbench.classify import (
    CLASSIFY_SYSTEM,
    TYPE_CODES,
    TYPE_GROUPS,
    TYPE_LABELS,
    TypeAssignment,
    classify_question,
    extract_code,
    group_of,
    group_shares,
    type_distribution,
)
from qgbench.errors import ClassificationParseError
from qgbench.gateway import Gateway, MockTransport, ModelSpec
from qgbench.question_gen import QuestionRecord

JUDGE = ModelSpec(name="mock-judge")


def question(text="Who directed the film Jaws?", qid="q1"):
    return QuestionRecord(
        id=qid, context_id="c1", source={"imported": "test"}, text=text, word_count=len(text.split())
    )


def assignment(qtype, qid="q1"):
    return TypeAssignment(question_id=qid, qtype=qtype, raw_judge_output=qtype)


def gateway(tmp_path, script):
    return Gateway(tmp_path / "cache", MockTransport(script), sleep=lambda _s: None)


class TestExtractCode:
    def test_bare_code(self):
        assert extract_code("T3") == "T3"

    def test_embedded_sentence(self):
        assert extract_code("The answer is T5.") == "T5"

    def test_t10_not_t1(self):
        assert extract_code("T10") == "T10"

    def test_case_insensitive(self):
        assert extract_code("others") == "OTHERS"
        assert extract_code("t8\nbecause...") == "T8"

    def test_t12_is_not_a_code(self):
        with pytest.raises(ClassificationParseError):
            extract_code("T12")

    def test_no_code(self):
        with pytest.raises(ClassificationParseError):
            extract_code("descriptive question")


class TestClassifyQuestion:
    def test_happy_path(self, tmp_path):
        gw = gateway(tmp_path, [{"match": "", "response": "T1"}])
        result = classify_question(question(), JUDGE, gw)
        assert result.qtype == "T1"
        assert result.question_id == "q1"
        sent = gw.transport.requests[0]
        assert sent.system == CLASSIFY_SYSTEM
        assert sent.user == "Who directed the film Jaws?"

    def test_retry_recovers(self, tmp_path):
        gw = gateway(
            tmp_path,
            [
                {"match": "", "response": "that is a location question"},
                {"match": "", "response": "T3"},
            ],
        )
        result = classify_question(question("Where is the Eiffel Tower located?"), JUDGE, gw)
        assert result.qtype == "T3"
        assert "only the category code" in gw.transport.requests[-1].system

    def test_retry_exhausted(self, tmp_path):
        bad = {"match": "", "response": "no code here"}
        gw = gateway(tmp_path, [bad, bad])
        with pytest.raises(ClassificationParseError):
            classify_question(question(), JUDGE, gw)
        assert gw.transport.calls == 2

    def test_prompt_embeds_all_definitions(self):
        for code, label in TYPE_LABELS.items():
            if code == "OTHERS":
                continue
            assert f"{code}." in CLASSIFY_SYSTEM
        assert "Output only the category code (T1-T10 or OTHERS) on a single line." in CLASSIFY_SYSTEM


class TestTypeDistribution:
    def test_uniform(self):
        dist = type_distribution([assignment("T5") for _ in range(4)])
        assert dist["T5"] == 100.0
        assert all(dist[code] == 0.0 for code in TYPE_CODES if code != "T5")

    def test_even_split(self):
        dist = type_distribution([assignment("T1"), assignment("T8")])
        assert dist["T1"] == 50.0
        assert dist["T8"] == 50.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            type_distribution([])

    def test_all_codes_present(self):
        dist = type_distribution([assignment("T2")])
        assert list(dist) == TYPE_CODES

    @given(st.lists(st.sampled_from(TYPE_CODES), min_size=1, max_size=60))
    def test_sums_to_100(self, codes):
        dist = type_distribution([assignment(c, qid=f"q{i}") for i, c in enumerate(codes)])
        assert sum(dist.values()) == pytest.approx(100.0, abs=1e-9)
        assert all(v >= 0 for v in dist.values())

    @given(st.lists(st.sampled_from(TYPE_CODES), min_size=1, max_size=60))
    def test_group_shares_sum_members(self, codes):
        dist = type_distribution([assignment(c, qid=f"q{i}") for i, c in enumerate(codes)])
        shares = group_shares(dist)
        for group, members in TYPE_GROUPS.items():
            assert shares[group] == pytest.approx(sum(dist[m] for m in members))


def test_group_of():
    assert group_of("T1") == "T1-T5"
    assert group_of("T7") == "T6-T7"
    assert group_of("T10") == "T8-T10"
    assert group_of("OTHERS") is None


def test_assignment_rejects_unknown_code():
    with pytest.raises(ValueError):
        TypeAssignment(question_id="q", qtype="T11", raw_judge_output="T11")
