"""Stage orchestration: resumable pipeline from corpus dump to report.

Stages run in dependency order under `all`; each stage is idempotent given a
warm response cache. Per-question failures are logged and tallied rather
than fatal unless strict mode is on; whole-run problems (bad config, missing
prerequisites, broken imports) always raise.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import answer_eval, classify, coverage, report
from .answer_eval import BASE, CONCISE, WITH_CONTEXT
from .config import RunConfig
from .corpus import ContextUnit, RenderedContext, ingest_dump, render_context
from .errors import ConfigError, DependencyError, QGBenchError
from .figures import render_figures
from .gateway import Gateway
from .question_gen import (
    PROMPT_VARIANTS,
    QuestionRecord,
    dataset_label,
    generate_questions,
    import_questions,
)
from .storage import atomic_write_text, read_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)

STAGE_ORDER = ["ingest", "generate", "classify", "coverage", "answer", "shorten", "report"]

# file -> producing stage, per consuming stage
STAGE_INPUTS = {
    "ingest": [],
    "generate": [("contexts.jsonl", "ingest")],
    "classify": [("questions.jsonl", "generate")],
    "coverage": [("questions.jsonl", "generate")],
    "answer": [("questions.jsonl", "generate")],
    "shorten": [
        ("answers.jsonl", "answer"),
        ("ratings.jsonl", "answer"),
        ("types.jsonl", "classify"),
    ],
    "report": [
        ("types.jsonl", "classify"),
        ("coverage.jsonl", "coverage"),
        ("shortening.jsonl", "shorten"),
    ],
}


@dataclass
class StageEnv:
    config: RunConfig
    gateway: Gateway
    strict: bool = False

    @property
    def out(self) -> Path:
        return Path(self.config.output_dir)


class StageFailure(QGBenchError):
    """A per-question failure escalated by strict mode."""


def _check_inputs(stage: str, out: Path) -> None:
    for filename, producer in STAGE_INPUTS[stage]:
        if not (out / filename).exists():
            raise DependencyError(
                f"stage {stage!r} needs {filename} from stage {producer!r}; run that stage first"
            )


def _run_tasks(env: StageEnv, items: list, fn, what: str, describe=None) -> tuple[list, int]:
    """Run fn over items in a bounded pool; results keep submission order.

    Failed items are dropped and tallied (or escalated under strict).
    ConfigError is always fatal: a missing API key would fail every item
    the same way.
    """
    describe = describe or (lambda item: getattr(item, "id", item))
    results = []
    failures = 0
    with ThreadPoolExecutor(max_workers=env.config.concurrency) as pool:
        futures = [(item, pool.submit(fn, item)) for item in items]
        for item, future in futures:
            try:
                results.append(future.result())
            except ConfigError:
                raise
            except QGBenchError as exc:
                failures += 1
                logger.error("%s failed for %s: %s", what, describe(item), exc)
                if env.strict:
                    raise StageFailure(f"{what} failed in strict mode: {exc}") from exc
    return results, failures


def _record_stats(out: Path, stage: str, stats: dict) -> None:
    path = out / "stage_stats.json"
    existing = {}
    if path.exists():
        existing = json.loads(path.read_text(encoding="utf-8"))
    existing[stage] = stats
    write_json(path, existing)


def _load_contexts(out: Path) -> dict[str, ContextUnit]:
    units = {}
    for name in ("contexts.jsonl", "imported_contexts.jsonl"):
        path = out / name
        if path.exists():
            for row in read_jsonl(path):
                unit = ContextUnit.from_dict(row)
                units[unit.id] = unit
    return units


def _load_questions(out: Path) -> list[QuestionRecord]:
    return [QuestionRecord.from_dict(row) for row in read_jsonl(out / "questions.jsonl")]


def _rendered(units: dict[str, ContextUnit]) -> dict[str, RenderedContext]:
    return {uid: render_context(unit) for uid, unit in units.items()}


# --- stages -----------------------------------------------------------------


def stage_ingest(env: StageEnv) -> dict:
    config = env.config
    corpus_path = Path(config.corpus_path)
    if not corpus_path.exists():
        raise ConfigError(f"corpus file not found: {corpus_path}")
    with open(corpus_path, encoding="utf-8") as fh:
        units = ingest_dump(
            fh, min_words=config.min_words, max_contexts=config.n_contexts, seed=config.seed
        )
    write_jsonl(env.out / "contexts.jsonl", (u.to_dict() for u in units))
    logger.info("ingest: %d contexts", len(units))
    return {"contexts": len(units)}


def stage_generate(env: StageEnv) -> dict:
    config = env.config
    _check_inputs("generate", env.out)
    units = [ContextUnit.from_dict(row) for row in read_jsonl(env.out / "contexts.jsonl")]
    rendered = [render_context(u) for u in units]

    tasks = [
        (model, PROMPT_VARIANTS[variant], unit)
        for model in config.generator_models
        for variant in config.prompt_variants
        for unit in rendered
    ]

    def one(task):
        model, variant, unit = task
        return generate_questions(
            unit, model, variant, config.questions_per_context, env.gateway
        )

    batches, failures = _run_tasks(
        env,
        tasks,
        one,
        "question generation",
        describe=lambda t: f"{t[2].context_id}/{t[0].name}/{t[1].id}",
    )
    questions = [record for batch in batches for record in batch]

    imported_contexts = []
    imported_count = 0
    for spec in config.imports:
        result = import_questions(spec.path, spec.name)
        questions.extend(result.questions)
        imported_contexts.extend(result.contexts)
        imported_count += len(result.questions)
        logger.info("imported %d questions from %s", len(result.questions), spec.name)

    write_jsonl(env.out / "questions.jsonl", (q.to_dict() for q in questions))
    write_jsonl(env.out / "imported_contexts.jsonl", (u.to_dict() for u in imported_contexts))
    stats = {
        "questions": len(questions),
        "generated": len(questions) - imported_count,
        "imported": imported_count,
        "failed_generations": failures,
    }
    logger.info("generate: %s", stats)
    return stats


def stage_classify(env: StageEnv) -> dict:
    config = env.config
    _check_inputs("classify", env.out)
    questions = _load_questions(env.out)
    judge = config.judge_model

    assignments, failures = _run_tasks(
        env,
        questions,
        lambda q: classify.classify_question(q, judge, env.gateway),
        "classification",
    )
    write_jsonl(env.out / "types.jsonl", (a.to_dict() for a in assignments))

    per_label: dict[str, list] = {}
    label_of = {q.id: dataset_label(q) for q in questions}
    for a in assignments:
        per_label.setdefault(label_of[a.question_id], []).append(a)
    atomic_write_text(
        env.out / "type_distribution.csv", report.cross_type_distribution_csv(per_label)
    )
    stats = {"classified": len(assignments), "failed": failures}
    logger.info("classify: %s", stats)
    return stats


def stage_coverage(env: StageEnv) -> dict:
    config = env.config
    _check_inputs("coverage", env.out)
    questions = _load_questions(env.out)
    units = _load_contexts(env.out)
    judge = config.judge_model

    with_context = [q for q in questions if q.context_id and q.context_id in units]
    skipped = len(questions) - len(with_context)

    def one(q):
        unit = units[q.context_id]
        selected = coverage.select_relevant_sentences(q, unit, judge, env.gateway)
        return coverage.coverage_metrics(selected, unit, question_id=q.id)

    records, failures = _run_tasks(env, with_context, one, "coverage selection")
    write_jsonl(env.out / "coverage.jsonl", (r.to_dict() for r in records))

    label_of = {q.id: dataset_label(q) for q in questions}
    per_label: dict[str, list] = {}
    for r in records:
        per_label.setdefault(label_of[r.question_id], []).append(r)
    context_of = {q.id: units.get(q.context_id) for q in questions}
    atomic_write_text(
        env.out / "coverage_summary.csv",
        report.cross_coverage_summary_csv(per_label, context_of),
    )
    atomic_write_text(
        env.out / "bucket_frequencies.csv", report.cross_bucket_frequencies_csv(per_label)
    )
    stats = {"covered": len(records), "skipped_no_context": skipped, "failed": failures}
    logger.info("coverage: %s", stats)
    return stats


def stage_answer(env: StageEnv) -> dict:
    config = env.config
    _check_inputs("answer", env.out)
    questions = _load_questions(env.out)
    units = _load_contexts(env.out)
    rendered = _rendered(units)
    answerer = config.answerer_model
    judge = config.judge_model
    variants = [CONCISE] + [answer_eval.limit_variant(x) for x in config.word_limits]

    with_context = [q for q in questions if q.context_id and q.context_id in rendered]
    skipped = len(questions) - len(with_context)

    def one(q):
        unit = rendered[q.context_id]
        rows = []

        def add(answer):
            rating = answer_eval.rate_answer(q, answer, unit, judge, env.gateway)
            rows.append(
                (
                    answer.to_dict(),
                    {
                        "question_id": q.id,
                        "mode": answer.mode,
                        "variant": answer.variant,
                        "score": rating.score,
                        "justification": rating.justification,
                    },
                )
            )

        add(answer_eval.generate_answer(q, unit, BASE, answerer, env.gateway))
        add(answer_eval.generate_answer(q, None, BASE, answerer, env.gateway))
        for variant in variants:
            add(answer_eval.generate_answer(q, unit, variant, answerer, env.gateway))
        return rows

    batches, failures = _run_tasks(env, with_context, one, "answer generation")
    answer_rows = [a for batch in batches for a, _ in batch]
    rating_rows = [r for batch in batches for _, r in batch]
    write_jsonl(env.out / "answers.jsonl", answer_rows)
    write_jsonl(env.out / "ratings.jsonl", rating_rows)

    label_of = {q.id: dataset_label(q) for q in questions}
    per_label: dict[str, list] = {}
    for row in rating_rows:
        per_label.setdefault(label_of[row["question_id"]], []).append(row)
    atomic_write_text(
        env.out / "rating_histograms.csv",
        report.cross_rating_histograms_csv(per_label, config.unanswered_threshold),
    )
    stats = {
        "answered": len(batches),
        "answers": len(answer_rows),
        "skipped_no_context": skipped,
        "failed": failures,
    }
    logger.info("answer: %s", stats)
    return stats


def stage_shorten(env: StageEnv) -> dict:
    config = env.config
    _check_inputs("shorten", env.out)
    questions = _load_questions(env.out)
    question_of = {q.id: q for q in questions}
    answers = read_jsonl(env.out / "answers.jsonl")
    ratings = read_jsonl(env.out / "ratings.jsonl")
    assignments = [classify.TypeAssignment.from_dict(r) for r in read_jsonl(env.out / "types.jsonl")]

    answer_of = {}
    for row in answers:
        answer_of[(row["question_id"], row["mode"], row["variant"])] = answer_eval.AnswerRecord.from_dict(row)
    rating_of = {}
    for row in ratings:
        rating_of[(row["question_id"], row["mode"], row["variant"])] = answer_eval.Rating(
            row["score"], row["justification"]
        )

    variants = [CONCISE] + [answer_eval.limit_variant(x) for x in config.word_limits]
    results = []
    skipped = 0
    qids = sorted({qid for qid, mode, variant in answer_of if mode == WITH_CONTEXT and variant == BASE})
    for qid in qids:
        base_key = (qid, WITH_CONTEXT, BASE)
        if base_key not in rating_of:
            skipped += 1
            continue
        pairs = []
        complete = True
        for variant in variants:
            key = (qid, WITH_CONTEXT, variant)
            if key not in answer_of or key not in rating_of:
                complete = False
                break
            pairs.append((answer_of[key], rating_of[key]))
        if not complete:
            skipped += 1
            logger.warning("shorten: incomplete variant set for %s, skipping", qid)
            continue
        results.append(
            answer_eval.shortened_length(
                question_of[qid], (answer_of[base_key], rating_of[base_key]), pairs
            )
        )

    write_jsonl(env.out / "shortening.jsonl", (r.to_dict() for r in results))

    label_of = {q.id: dataset_label(q) for q in questions}
    original_len = {
        qid: answer_of[(qid, WITH_CONTEXT, BASE)].word_count
        for qid in qids
        if (qid, WITH_CONTEXT, BASE) in answer_of
    }
    shortened_len = {r.question_id: r.shortened_len for r in results}
    per_label_questions: dict[str, list] = {}
    for q in questions:
        per_label_questions.setdefault(label_of[q.id], []).append(q)
    assignment_of = {a.question_id: a for a in assignments}
    atomic_write_text(
        env.out / "answer_length_summary.csv",
        report.cross_answer_length_csv(
            per_label_questions, original_len, shortened_len, assignment_of
        ),
    )
    atomic_write_text(
        env.out / "shortening_distributions.csv",
        report.cross_shortening_distribution_csv(
            per_label_questions, original_len, shortened_len
        ),
    )
    stats = {"shortened": len(results), "skipped_incomplete": skipped}
    logger.info("shorten: %s", stats)
    return stats


def stage_report(env: StageEnv) -> dict:
    config = env.config
    _check_inputs("report", env.out)
    questions = _load_questions(env.out)
    units = _load_contexts(env.out)
    assignments = [classify.TypeAssignment.from_dict(r) for r in read_jsonl(env.out / "types.jsonl")]
    coverage_records = [
        coverage.CoverageRecord.from_dict(r) for r in read_jsonl(env.out / "coverage.jsonl")
    ]
    rating_rows = read_jsonl(env.out / "ratings.jsonl") if (env.out / "ratings.jsonl").exists() else []
    shortening_rows = read_jsonl(env.out / "shortening.jsonl")
    answer_rows = read_jsonl(env.out / "answers.jsonl") if (env.out / "answers.jsonl").exists() else []

    reports = report.build_report(
        questions,
        units,
        assignments,
        coverage_records,
        rating_rows,
        shortening_rows,
        answer_rows,
        unanswered_threshold=config.unanswered_threshold,
    )

    extra: dict = {"n_questions": len(questions), "n_contexts": len(units)}
    stats_path = env.out / "stage_stats.json"
    if stats_path.exists():
        stages = json.loads(stats_path.read_text(encoding="utf-8"))
        # the report stage's own tally is not known yet and would make the
        # summary depend on the previous run
        stages.pop("report", None)
        extra["stages"] = stages
    calibration_path = env.out / "calibration.json"
    if calibration_path.exists():
        extra["calibration"] = json.loads(calibration_path.read_text(encoding="utf-8"))

    report_dir = env.out / "report"
    report.write_report_dir(reports, report_dir, extra=extra)
    n_figures = 0
    if config.figures:
        n_figures = len(render_figures(reports, report_dir / "figures"))
    stats = {"datasets": len(reports), "figures": n_figures}
    logger.info("report: %s", stats)
    return stats


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "generate": stage_generate,
    "classify": stage_classify,
    "coverage": stage_coverage,
    "answer": stage_answer,
    "shorten": stage_shorten,
    "report": stage_report,
}


def run_stage(stage: str, config: RunConfig, gateway: Gateway, strict: bool = False) -> dict:
    """Run one stage (or `all` in dependency order); returns its stats."""
    env = StageEnv(config=config, gateway=gateway, strict=strict)
    env.out.mkdir(parents=True, exist_ok=True)
    if stage == "all":
        stats = {}
        for name in STAGE_ORDER:
            stats[name] = STAGE_FUNCS[name](env)
            _record_stats(env.out, name, stats[name])
        return stats
    if stage not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {stage!r}; choose from {STAGE_ORDER + ['all']}")
    stats = STAGE_FUNCS[stage](env)
    _record_stats(env.out, stage, stats)
    return stats


def calibrate_judge(config: RunConfig, annotations_path: str, ratings_path: str | None = None) -> float:
    """Pearson correlation between human annotations and judge ratings.

    Annotations are JSONL rows {question_id, human_score}; they join against
    the with-context base ratings. Writes calibration.json next to the other
    outputs and returns r.
    """
    out = Path(config.output_dir)
    ratings_file = Path(ratings_path) if ratings_path else out / "ratings.jsonl"
    if not ratings_file.exists():
        raise DependencyError(f"ratings file {ratings_file} not found; run the answer stage first")
    judge_scores = {
        row["question_id"]: row["score"]
        for row in read_jsonl(ratings_file)
        if row["mode"] == WITH_CONTEXT and row["variant"] == BASE
    }
    human: list[float] = []
    judge: list[float] = []
    for i, row in enumerate(read_jsonl(annotations_path), 1):
        if "question_id" not in row or "human_score" not in row:
            raise ConfigError(f"annotation row {i} needs question_id and human_score")
        score = row["human_score"]
        if not isinstance(score, (int, float)) or not 0 <= score <= 5:
            raise ConfigError(f"annotation row {i}: human_score {score!r} outside 0..5")
        if row["question_id"] in judge_scores:
            human.append(float(score))
            judge.append(float(judge_scores[row["question_id"]]))
    if len(human) < 2:
        raise ConfigError(f"need at least 2 matched annotation pairs, found {len(human)}")
    try:
        r = report.pearson(human, judge)
    except ValueError as exc:
        raise QGBenchError(f"calibration failed: {exc}") from exc
    write_json(out / "calibration.json", {"n_pairs": len(human), "pearson_r": round(r, 4)})
    logger.info("calibration: r=%.4f over %d pairs", r, len(human))
    return r
