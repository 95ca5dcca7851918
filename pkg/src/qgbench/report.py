"""Aggregation of per-question records into per-dataset metric tables.

The six core tables per dataset label cover question-type distribution,
question lengths, context coverage, positional buckets, rating histograms,
and answer lengths before/after shortening; a seventh holds the raw
shortening length distributions. All CSV payloads are deterministic
byte-for-byte given identical inputs; percentages and lengths are rounded
to one decimal.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import classify
from .answer_eval import BASE, WITH_CONTEXT, WITHOUT_CONTEXT, Rating, answerability_histogram
from .classify import TYPE_CODES, TYPE_GROUPS, TYPE_LABELS, TypeAssignment
from .corpus import ContextUnit, word_tokens
from .coverage import CoverageRecord, bucket_frequencies
from .errors import IntegrityError
from .question_gen import QuestionRecord, dataset_label
from .storage import atomic_write_text, write_json

TABLE_NAMES = [
    "type_distribution",
    "length_stats",
    "coverage_summary",
    "bucket_frequencies",
    "rating_histograms",
    "answer_lengths",
]


def mean_std(values: list[float]) -> tuple[float, float]:
    """Arithmetic mean and sample (n-1) standard deviation; singleton std is 0."""
    if not values:
        raise ValueError("mean_std of empty list")
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def pearson(x: list[float], y: list[float]) -> float:
    """Pearson product-moment correlation coefficient."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise ValueError("pearson needs at least 2 points")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("pearson undefined for zero-variance input")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass
class MetricReport:
    dataset_label: str
    n_questions: int
    tables: dict[str, str] = field(default_factory=dict)  # table name -> CSV payload
    headline: dict = field(default_factory=dict)


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else f"{x:.1f}"


def _check_integrity(question_ids: set[str], references: dict[str, list[str]]) -> None:
    orphans = sorted(
        {f"{source}:{qid}" for source, ids in references.items() for qid in ids if qid not in question_ids}
    )
    if orphans:
        raise IntegrityError(f"records reference unknown question ids: {', '.join(orphans[:20])}")


def _type_distribution_rows(assignments: list[TypeAssignment]) -> list[list]:
    rows = [["code", "name", "percent"]]
    if assignments:
        dist = classify.type_distribution(assignments)
        shares = classify.group_shares(dist)
    else:
        dist = {code: None for code in TYPE_CODES}
        shares = {group: None for group in TYPE_GROUPS}
    for code in TYPE_CODES:
        rows.append([code, TYPE_LABELS[code], _fmt(dist[code])])
    for group in TYPE_GROUPS:
        rows.append([group, "Group", _fmt(shares[group])])
    return rows


def _length_stats_rows(
    questions: list[QuestionRecord], assignment_of: dict[str, TypeAssignment]
) -> list[list]:
    rows = [["group", "n", "share_percent", "mean_words", "std_words"]]
    lengths = [q.word_count for q in questions]
    mean, std = mean_std(lengths)
    rows.append(["overall", len(questions), _fmt(100.0), _fmt(mean), _fmt(std)])
    classified = [q for q in questions if q.id in assignment_of]
    for group, members in TYPE_GROUPS.items():
        group_lengths = [
            q.word_count for q in classified if assignment_of[q.id].qtype in members
        ]
        if group_lengths:
            share = 100.0 * len(group_lengths) / len(classified)
            gmean, gstd = mean_std(group_lengths)
            rows.append([group, len(group_lengths), _fmt(share), _fmt(gmean), _fmt(gstd)])
        else:
            rows.append([group, 0, _fmt(0.0), "", ""])
    return rows


def _coverage_summary_rows(
    records: list[CoverageRecord], context_of: dict[str, ContextUnit | None]
) -> list[list]:
    rows = [["metric", "n", "mean", "std"]]
    if not records:
        for metric in ("context_words", "covered_words_pct", "context_sentences", "covered_sentences_pct"):
            rows.append([metric, 0, "", ""])
        return rows
    units = [context_of[r.question_id] for r in records]
    metrics = [
        ("context_words", [float(u.word_count) for u in units]),
        ("covered_words_pct", [r.pct_covered_words for r in records]),
        ("context_sentences", [float(len(u.sentences)) for u in units]),
        ("covered_sentences_pct", [r.pct_covered_sentences for r in records]),
    ]
    for name, values in metrics:
        mean, std = mean_std(values)
        rows.append([name, len(values), _fmt(mean), _fmt(std)])
    return rows


def _bucket_rows(records: list[CoverageRecord]) -> list[list]:
    rows = [["bucket", "range", "percent"]]
    freqs = bucket_frequencies(records) if records else [None] * 10
    for b in range(10):
        rows.append([b, f"0.{b}-{'1.0' if b == 9 else f'0.{b + 1}'}", _fmt(freqs[b])])
    return rows


def _rating_histogram_rows(rating_rows: list[dict], unanswered_threshold: int) -> list[list]:
    rows = [["mode", "n"] + [f"score_{s}" for s in range(6)] + ["unanswered_share"]]
    for mode in (WITH_CONTEXT, WITHOUT_CONTEXT):
        scores = [r for r in rating_rows if r["mode"] == mode and r["variant"] == BASE]
        if scores:
            hist = answerability_histogram(
                [Rating(r["score"], "") for r in scores], unanswered_threshold
            )
            rows.append(
                [mode, len(scores)]
                + [_fmt(hist.percentages[s]) for s in range(6)]
                + [_fmt(hist.unanswered_share)]
            )
        else:
            rows.append([mode, 0] + [""] * 7)
    return rows


def _answer_length_rows(
    questions: list[QuestionRecord],
    original_len: dict[str, int],
    shortened_len: dict[str, int],
    assignment_of: dict[str, TypeAssignment],
) -> list[list]:
    rows = [["group", "n", "original_mean", "original_std", "shortened_mean", "shortened_std"]]

    def stats(qids: list[str]) -> list:
        orig = [original_len[q] for q in qids if q in original_len]
        short = [shortened_len[q] for q in qids if q in shortened_len]
        if not orig:
            return [0, "", "", "", ""]
        om, os_ = mean_std([float(v) for v in orig])
        if short:
            sm, ss = mean_std([float(v) for v in short])
            return [len(orig), _fmt(om), _fmt(os_), _fmt(sm), _fmt(ss)]
        return [len(orig), _fmt(om), _fmt(os_), "", ""]

    rows.append(["overall"] + stats([q.id for q in questions]))
    for group, members in TYPE_GROUPS.items():
        qids = [
            q.id
            for q in questions
            if q.id in assignment_of and assignment_of[q.id].qtype in members
        ]
        rows.append([group] + stats(qids))
    golden = [float(len(word_tokens(q.golden_answer))) for q in questions if q.golden_answer]
    if golden:
        gm, gs = mean_std(golden)
        rows.append(["golden", len(golden), _fmt(gm), _fmt(gs), "", ""])
    return rows


def _shortening_distribution_rows(
    original_len: dict[str, int], shortened_len: dict[str, int]
) -> list[list]:
    rows = [["series", "word_count", "count"]]
    for series, lens in (("original", original_len), ("shortened", shortened_len)):
        counts: dict[int, int] = {}
        for v in lens.values():
            counts[v] = counts.get(v, 0) + 1
        for length in sorted(counts):
            rows.append([series, length, counts[length]])
    return rows


def build_report(
    questions: list[QuestionRecord],
    contexts: dict[str, ContextUnit],
    assignments: list[TypeAssignment],
    coverage_records: list[CoverageRecord],
    rating_rows: list[dict],
    shortening_rows: list[dict],
    answer_rows: list[dict],
    unanswered_threshold: int = 2,
) -> list[MetricReport]:
    """Assemble one MetricReport per dataset label.

    rating/shortening/answer rows are the stage JSONL dicts. Raises
    IntegrityError when any row references a question id that does not
    exist.
    """
    if not questions:
        raise ValueError("build_report needs at least one question")
    question_ids = {q.id for q in questions}
    _check_integrity(
        question_ids,
        {
            "assignment": [a.question_id for a in assignments],
            "coverage": [c.question_id for c in coverage_records],
            "rating": [r["question_id"] for r in rating_rows],
            "shortening": [s["question_id"] for s in shortening_rows],
            "answer": [a["question_id"] for a in answer_rows],
        },
    )

    label_of = {q.id: dataset_label(q) for q in questions}
    labels = sorted(set(label_of.values()))
    assignment_of = {a.question_id: a for a in assignments}
    context_of = {q.id: contexts.get(q.context_id) for q in questions}

    original_len: dict[str, int] = {}
    for row in answer_rows:
        if row["mode"] == WITH_CONTEXT and row["variant"] == BASE:
            original_len[row["question_id"]] = row["word_count"]
    shortened_len = {row["question_id"]: row["shortened_len"] for row in shortening_rows}

    reports = []
    for label in labels:
        l_questions = sorted(
            (q for q in questions if label_of[q.id] == label), key=lambda q: q.id
        )
        l_ids = {q.id for q in l_questions}
        l_assignments = [a for a in assignments if a.question_id in l_ids]
        l_coverage = sorted(
            (c for c in coverage_records if c.question_id in l_ids),
            key=lambda c: c.question_id,
        )
        l_ratings = [r for r in rating_rows if r["question_id"] in l_ids]
        l_original = {k: v for k, v in original_len.items() if k in l_ids}
        l_shortened = {k: v for k, v in shortened_len.items() if k in l_ids}

        tables = {
            "type_distribution": _csv(_type_distribution_rows(l_assignments)),
            "length_stats": _csv(_length_stats_rows(l_questions, assignment_of)),
            "coverage_summary": _csv(_coverage_summary_rows(l_coverage, context_of)),
            "bucket_frequencies": _csv(_bucket_rows(l_coverage)),
            "rating_histograms": _csv(
                _rating_histogram_rows(l_ratings, unanswered_threshold)
            ),
            "answer_lengths": _csv(
                _answer_length_rows(l_questions, l_original, l_shortened, assignment_of)
            ),
            "shortening_distributions": _csv(
                _shortening_distribution_rows(l_original, l_shortened)
            ),
        }
        reports.append(
            MetricReport(
                dataset_label=label,
                n_questions=len(l_questions),
                tables=tables,
                headline=_headline(
                    l_questions, l_assignments, l_coverage, l_ratings, l_original,
                    l_shortened, unanswered_threshold,
                ),
            )
        )
    return reports


def _headline(
    questions, assignments, coverage_records, rating_rows, original_len, shortened_len,
    unanswered_threshold,
) -> dict:
    out: dict = {"n_questions": len(questions)}
    qmean, qstd = mean_std([q.word_count for q in questions])
    out["question_length"] = {"mean": round(qmean, 1), "std": round(qstd, 1)}
    if assignments:
        shares = classify.group_shares(classify.type_distribution(assignments))
        out["type_group_shares"] = {g: round(v, 1) for g, v in shares.items()}
        others = classify.type_distribution(assignments)["OTHERS"]
        out["others_rate"] = round(others, 2)
    if coverage_records:
        wm, _ = mean_std([c.pct_covered_words for c in coverage_records])
        sm, _ = mean_std([c.pct_covered_sentences for c in coverage_records])
        out["coverage"] = {"covered_words_pct": round(wm, 1), "covered_sentences_pct": round(sm, 1)}
    for mode in (WITH_CONTEXT, WITHOUT_CONTEXT):
        scores = [r for r in rating_rows if r["mode"] == mode and r["variant"] == BASE]
        if scores:
            hist = answerability_histogram(
                [Rating(r["score"], "") for r in scores], unanswered_threshold
            )
            out[f"unanswered_share_{mode}"] = round(hist.unanswered_share, 1)
    if original_len:
        om, ostd = mean_std([float(v) for v in original_len.values()])
        out["answer_length_original"] = {"mean": round(om, 1), "std": round(ostd, 1)}
    if shortened_len:
        sm, sstd = mean_std([float(v) for v in shortened_len.values()])
        out["answer_length_shortened"] = {"mean": round(sm, 1), "std": round(sstd, 1)}
    return out


def _cross(per_label_rows: dict[str, list[list]]) -> str:
    """Stack per-label row sets into one CSV with a leading dataset column."""
    labels = sorted(per_label_rows)
    if not labels:
        return _csv([["dataset"]])
    header = ["dataset"] + per_label_rows[labels[0]][0]
    rows = [header]
    for label in labels:
        rows.extend([label] + row for row in per_label_rows[label][1:])
    return _csv(rows)


def cross_type_distribution_csv(per_label: dict[str, list[TypeAssignment]]) -> str:
    """Category rows against dataset columns, groups included."""
    labels = sorted(per_label)
    dists = {}
    shares = {}
    for label in labels:
        dists[label] = classify.type_distribution(per_label[label]) if per_label[label] else {}
        shares[label] = classify.group_shares(dists[label]) if per_label[label] else {}
    rows = [["code", "name"] + labels]
    for code in TYPE_CODES:
        rows.append([code, TYPE_LABELS[code]] + [_fmt(dists[l].get(code)) for l in labels])
    for group in TYPE_GROUPS:
        rows.append([group, "Group"] + [_fmt(shares[l].get(group)) for l in labels])
    return _csv(rows)


def cross_coverage_summary_csv(
    per_label: dict[str, list[CoverageRecord]], context_of: dict[str, ContextUnit | None]
) -> str:
    return _cross({l: _coverage_summary_rows(r, context_of) for l, r in per_label.items()})


def cross_bucket_frequencies_csv(per_label: dict[str, list[CoverageRecord]]) -> str:
    return _cross({l: _bucket_rows(r) for l, r in per_label.items()})


def cross_rating_histograms_csv(per_label: dict[str, list[dict]], unanswered_threshold: int) -> str:
    return _cross(
        {l: _rating_histogram_rows(r, unanswered_threshold) for l, r in per_label.items()}
    )


def cross_answer_length_csv(
    per_label_questions: dict[str, list[QuestionRecord]],
    original_len: dict[str, int],
    shortened_len: dict[str, int],
    assignment_of: dict[str, TypeAssignment],
) -> str:
    return _cross(
        {
            label: _answer_length_rows(questions, original_len, shortened_len, assignment_of)
            for label, questions in per_label_questions.items()
        }
    )


def cross_shortening_distribution_csv(
    per_label_questions: dict[str, list[QuestionRecord]],
    original_len: dict[str, int],
    shortened_len: dict[str, int],
) -> str:
    per_label_rows = {}
    for label, questions in per_label_questions.items():
        ids = {q.id for q in questions}
        per_label_rows[label] = _shortening_distribution_rows(
            {k: v for k, v in original_len.items() if k in ids},
            {k: v for k, v in shortened_len.items() if k in ids},
        )
    return _cross(per_label_rows)


def write_report_dir(reports: list[MetricReport], outdir: str | Path, extra: dict | None = None) -> None:
    """Write report/<label>/<table>.csv files plus summary.json.

    answer_length_summary.csv is an alias of answer_lengths.csv so both
    documented table names resolve.
    """
    outdir = Path(outdir)
    summary: dict = {"datasets": {}}
    for report in sorted(reports, key=lambda r: r.dataset_label):
        label_dir = outdir / report.dataset_label
        for name, payload in sorted(report.tables.items()):
            atomic_write_text(label_dir / f"{name}.csv", payload)
        atomic_write_text(label_dir / "answer_length_summary.csv", report.tables["answer_lengths"])
        summary["datasets"][report.dataset_label] = report.headline
    if extra:
        summary.update(extra)
    write_json(outdir / "summary.json", summary)
