"""Positional analysis of which article sentences fed the model summary.

Each model-summary sentence is mapped back (top-1) to an article sentence;
its normalized position lands in one of ``bins`` equal-width buckets.
Comparing the histograms before and after perturbation shows whether the
model switched to different source sentences.  Report emission is fully
deterministic: stable key order and fixed 6-decimal float formatting.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from relpara.corpus import Article
from relpara.llm import ParsedSummary
from relpara.metrics import ChangeReport, MetricReport
from relpara.perturb import ExclusionLog
from relpara.relevance import MapperMode, map_summary

__all__ = [
    "PositionHistogram",
    "ReportBundle",
    "position_distribution",
    "histogram_divergence",
    "emit_report",
    "dumps_stable",
]


@dataclass(frozen=True)
class PositionHistogram:
    """Distribution over normalized article positions; bins sum to 1."""

    bins: tuple[float, ...]
    n_mapped: int

    def __post_init__(self) -> None:
        if any(b < 0 for b in self.bins):
            raise ValueError("histogram bins must be non-negative")
        if self.n_mapped > 0 and abs(sum(self.bins) - 1.0) > 1e-9:
            raise ValueError("histogram bins must sum to 1")

    def to_dict(self) -> dict:
        return {"bins": list(self.bins), "n_mapped": self.n_mapped}


@dataclass(frozen=True)
class ReportBundle:
    """Everything one experiment run produced, ready for emission."""

    original: MetricReport
    perturbed: MetricReport
    change: ChangeReport
    histograms: tuple[PositionHistogram, PositionHistogram]
    exclusions: ExclusionLog

    def to_dict(self) -> dict:
        return {
            "dataset": self.original.dataset,
            "original": self.original.to_dict(),
            "perturbed": self.perturbed.to_dict(),
            "change": self.change.to_dict(),
            "histograms": {
                "original": self.histograms[0].to_dict(),
                "perturbed": self.histograms[1].to_dict(),
            },
            "exclusions": self.exclusions.to_dict(),
        }


def position_distribution(
    articles: Sequence[Article],
    summaries: Sequence[tuple[str, ParsedSummary]],
    mode: Optional[MapperMode] = None,
    bins: int = 10,
) -> PositionHistogram:
    """Histogram of normalized top-1 source positions for model summaries.

    A sentence mapped to article index j contributes at position
    j / (article_len - 1), or 0 for single-sentence articles; position 1.0
    is clamped into the last bin.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if len(articles) != len(summaries):
        raise ValueError(f"{len(articles)} articles vs {len(summaries)} summaries")
    mode = mode or MapperMode()
    top1 = MapperMode(mode.kind, 1)
    counts = [0] * bins
    total = 0
    for article, (summary_id, parsed) in zip(articles, summaries):
        if article.id != summary_id:
            raise ValueError(f"id misalignment: article {article.id!r} vs summary {summary_id!r}")
        relmap = map_summary(article, parsed.sentences, top1)
        length = len(article.sentences)
        for _, ranked in relmap.entries:
            j = ranked[0]
            position = j / (length - 1) if length > 1 else 0.0
            counts[min(int(position * bins), bins - 1)] += 1
            total += 1
    if total == 0:
        return PositionHistogram(tuple(0.0 for _ in range(bins)), 0)
    return PositionHistogram(tuple(c / total for c in counts), total)


def histogram_divergence(a: PositionHistogram, b: PositionHistogram) -> float:
    """L1 distance between two histograms, in [0, 2]."""
    if len(a.bins) != len(b.bins):
        raise ValueError(f"bin count mismatch: {len(a.bins)} vs {len(b.bins)}")
    return sum(abs(x - y) for x, y in zip(a.bins, b.bins))


# ---------------------------------------------------------------------------
# Deterministic serialization
# ---------------------------------------------------------------------------


def _format_float(value: float) -> str:
    # -0.0 would serialize as "-0.000000" and break byte-stable goldens.
    if value == 0:
        value = 0.0
    return f"{value:.6f}"


def _write_json(obj, out: list[str]) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(", ")
            out.append(f'"{key}": ')
            _write_json(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(", ")
            _write_json(item, out)
        out.append("]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, float):
        out.append(_format_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif obj is None:
        out.append("null")
    else:
        out.append(json.dumps(str(obj), ensure_ascii=False))


def dumps_stable(obj) -> str:
    """JSON with sorted keys and floats fixed to 6 decimal places."""
    out: list[str] = []
    _write_json(obj, out)
    return "".join(out)


# ---------------------------------------------------------------------------
# SVG bar charts
# ---------------------------------------------------------------------------

_SVG_W = 640
_SVG_H = 360
_MARGIN = 50


def _grouped_bar_svg(
    title: str,
    categories: Sequence[str],
    original: Sequence[float],
    perturbed: Sequence[float],
) -> str:
    plot_w = _SVG_W - 2 * _MARGIN
    plot_h = _SVG_H - 2 * _MARGIN
    top = max([*original, *perturbed, 1e-9])
    group_w = plot_w / max(len(categories), 1)
    bar_w = group_w * 0.35
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}">',
        f'<text x="{_SVG_W / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{_MARGIN}" y1="{_SVG_H - _MARGIN}" x2="{_SVG_W - _MARGIN}" '
        f'y2="{_SVG_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_SVG_H - _MARGIN}" stroke="black"/>',
        f'<rect x="{_SVG_W - 190}" y="30" width="12" height="12" fill="#4878a8"/>',
        f'<text x="{_SVG_W - 174}" y="41" font-family="sans-serif" font-size="11">original</text>',
        f'<rect x="{_SVG_W - 110}" y="30" width="12" height="12" fill="#d0804f"/>',
        f'<text x="{_SVG_W - 94}" y="41" font-family="sans-serif" font-size="11">perturbed</text>',
    ]
    for i, label in enumerate(categories):
        x0 = _MARGIN + i * group_w
        for offset, value, color in (
            (group_w * 0.12, original[i], "#4878a8"),
            (group_w * 0.53, perturbed[i], "#d0804f"),
        ):
            height = plot_h * (value / top)
            parts.append(
                f'<rect x="{x0 + offset:.2f}" y="{_SVG_H - _MARGIN - height:.2f}" '
                f'width="{bar_w:.2f}" height="{height:.2f}" fill="{color}">'
                f"<title>{_format_float(value)}</title></rect>"
            )
        parts.append(
            f'<text x="{x0 + group_w / 2:.2f}" y="{_SVG_H - _MARGIN + 16}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">{label}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN - 6}" y="{_MARGIN - 8}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{_format_float(top)}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def emit_report(bundle: ReportBundle, out_dir: "str | Path") -> list[Path]:
    """Write report.json, two CSVs, and two SVGs; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_path = out_dir / "report.json"
    report_path.write_text(dumps_stable(bundle.to_dict()) + "\n", encoding="utf-8")

    metric_names = [
        name for name in bundle.original.metric_means() if name in bundle.perturbed.metric_means()
    ]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["metric", "original", "perturbed", "change_pct"])
    for name in metric_names:
        writer.writerow(
            [
                name,
                _format_float(bundle.original.metric_means()[name]),
                _format_float(bundle.perturbed.metric_means()[name]),
                _format_float(bundle.change.changes[name]),
            ]
        )
    metrics_csv = out_dir / "metrics.csv"
    metrics_csv.write_text(buffer.getvalue(), encoding="utf-8")

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["bin", "original", "perturbed"])
    for i, (orig, pert) in enumerate(zip(bundle.histograms[0].bins, bundle.histograms[1].bins)):
        writer.writerow([i, _format_float(orig), _format_float(pert)])
    histograms_csv = out_dir / "histograms.csv"
    histograms_csv.write_text(buffer.getvalue(), encoding="utf-8")

    metrics_svg = out_dir / "metrics.svg"
    short = {"rouge1_f1": "R1", "rouge2_f1": "R2", "rougeL_f1": "RL",
             "bertscore_f1": "BS", "geval": "GE"}
    metrics_svg.write_text(
        _grouped_bar_svg(
            "Metric means: original vs perturbed",
            [short.get(m, m) for m in metric_names],
            [bundle.original.metric_means()[m] for m in metric_names],
            [bundle.perturbed.metric_means()[m] for m in metric_names],
        ),
        encoding="utf-8",
    )

    histograms_svg = out_dir / "histograms.svg"
    histograms_svg.write_text(
        _grouped_bar_svg(
            "Source-position distribution: original vs perturbed",
            [str(i) for i in range(len(bundle.histograms[0].bins))],
            list(bundle.histograms[0].bins),
            list(bundle.histograms[1].bins),
        ),
        encoding="utf-8",
    )

    return [report_path, metrics_csv, histograms_csv, metrics_svg, histograms_svg]
