"""Figure rendering for the report directory.

Figures are drawn from the same CSV payloads the report writes, so anything
shown here can be reproduced from the delimited output alone. Rendering is
deterministic: fixed backend, size, dpi, and no timestamp metadata.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .report import MetricReport  # noqa: E402

DPI = 120
_SAVE_KWARGS = {"dpi": DPI, "metadata": {"Software": None}, "bbox_inches": "tight"}


def _rows(table: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(table)))[1:]


def _save(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def bucket_frequencies_figure(reports: list[MetricReport], path: Path) -> bool:
    series = []
    for report in reports:
        rows = _rows(report.tables["bucket_frequencies"])
        if any(not r[2] for r in rows):
            continue  # label had no coverage data
        series.append((report.dataset_label, [float(r[2]) for r in rows]))
    if not series:
        return False
    ranges = [r[1] for r in _rows(reports[0].tables["bucket_frequencies"])]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label, values in series:
        ax.plot(range(10), values, marker="o", label=label)
    ax.set_xticks(range(10))
    ax.set_xticklabels(ranges, rotation=45, ha="right")
    ax.set_xlabel("context region (word-range decile)")
    ax.set_ylabel("questions touching region (%)")
    ax.set_ylim(bottom=0)
    ax.legend(fontsize=8)
    ax.set_title("Context coverage by region")
    _save(fig, path)
    return True


def rating_histograms_figure(reports: list[MetricReport], path: Path) -> bool:
    modes = ["with_context", "without_context"]
    data: dict[str, dict[str, list[float]]] = {m: {} for m in modes}
    for report in reports:
        for row in _rows(report.tables["rating_histograms"]):
            if row[0] in modes and row[2]:
                data[row[0]][report.dataset_label] = [float(v) for v in row[2:8]]
    if not any(data[m] for m in modes):
        return False
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    width = 0.8
    for ax, mode in zip(axes, modes):
        labels = sorted(data[mode])
        n = max(len(labels), 1)
        for i, label in enumerate(labels):
            offsets = [s + width * (i - (n - 1) / 2) / n for s in range(6)]
            ax.bar(offsets, data[mode][label], width=width / n, label=label)
        ax.set_xticks(range(6))
        ax.set_xlabel("rating")
        ax.set_title(mode.replace("_", " "))
    axes[0].set_ylabel("answers (%)")
    axes[0].legend(fontsize=8)
    fig.suptitle("Answer rating distribution")
    _save(fig, path)
    return True


def shortening_figure(report: MetricReport, path: Path) -> bool:
    series: dict[str, dict[int, int]] = {"original": {}, "shortened": {}}
    for row in _rows(report.tables["shortening_distributions"]):
        series[row[0]][int(row[1])] = int(row[2])
    if not series["original"]:
        return False
    top = max(max(d) for d in series.values() if d)
    xs = list(range(top + 1))
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name, style in (("original", {"alpha": 0.6}), ("shortened", {"alpha": 0.6})):
        counts = [series[name].get(x, 0) for x in xs]
        ax.bar(xs, counts, width=1.0, label=name, **style)
    ax.set_xlabel("answer length (words)")
    ax.set_ylabel("answers")
    ax.legend(fontsize=8)
    ax.set_title(f"Answer shortening: {report.dataset_label}")
    _save(fig, path)
    return True


def render_figures(reports: list[MetricReport], figures_dir: str | Path) -> list[Path]:
    """Render every figure with data behind it; returns the written paths."""
    figures_dir = Path(figures_dir)
    written = []
    path = figures_dir / "bucket_frequencies.png"
    if bucket_frequencies_figure(reports, path):
        written.append(path)
    path = figures_dir / "rating_histograms.png"
    if rating_histograms_figure(reports, path):
        written.append(path)
    for report in sorted(reports, key=lambda r: r.dataset_label):
        path = figures_dir / f"shortening_{report.dataset_label}.png"
        if shortening_figure(report, path):
            written.append(path)
    return written
