"""Report artifacts: accuracy tables (CSV + markdown) and occurrence
histograms (CSV + SVG).

Markdown tables mirror the published layout: one row per (task or
category, feature set), classifier columns, and exactly one bold best
accuracy per task row group. Every artifact ends with a config-digest
footer so a table can be traced to the run that produced it. All output
is deterministic: full-precision reprs in CSVs, fixed decimals in tables,
no timestamps.
"""
from __future__ import annotations

import csv
from pathlib import Path

from .errors import ParseError, ValidationError
from .evaluation import CLASSIFIERS, CellResult, EvalReport, EvalRow
from .selection import OccurrenceHistogram

_CAPTIONS = {
    "single": "Single task accuracies. For each task the best result is in bold.",
    "merged": "Merged task accuracies. For each group, the best result is in bold.",
    "selected": "Classification results with feature selection. "
                "For each task, the best result is in bold.",
}


def report_caption(mode: str) -> str:
    return _CAPTIONS.get(mode, "")


def write_report_csv(report: EvalReport, path, digest: str = "") -> None:
    """One row per grid cell; '#' footer lines carry run provenance."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task_type", "tasks", "feature_set", "classifier",
                         "accuracy", "fold_accuracies", "tp", "tn", "fp", "fn",
                         "n_samples", "failed_folds", "best_in_group"])
        for row in report.rows:
            r = row.result
            if r is None:
                writer.writerow([row.task_type, row.tasks_label, row.feature_set,
                                 row.classifier, "", "", "", "", "", "", "", "", ""])
                continue
            writer.writerow([
                row.task_type, row.tasks_label, row.feature_set, row.classifier,
                repr(r.mean_accuracy),
                ";".join(repr(a) for a in r.fold_accuracies),
                r.confusion["tp"], r.confusion["tn"],
                r.confusion["fp"], r.confusion["fn"],
                r.n_samples, len(r.failed_folds),
                int(row.best_in_group),
            ])
        fh.write(f"# mode={report.mode} seed={report.seed} config_digest={digest}\n")


def load_report_csv(path) -> tuple[EvalReport, str]:
    """Inverse of write_report_csv; returns (report, digest)."""
    path = Path(path)
    report = EvalReport(mode="")
    digest = ""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValidationError(f"{path.name}: empty file")
    rows = list(csv.reader(lines))
    header = rows[0]
    if header[:4] != ["task_type", "tasks", "feature_set", "classifier"]:
        raise ParseError(f"{path.name}: bad header")
    for row in rows[1:]:
        if not row:
            continue
        if row[0].startswith("#"):
            text = ",".join(row)
            for token in text.lstrip("# ").split():
                key, _, value = token.partition("=")
                if key == "mode":
                    report.mode = value
                elif key == "seed":
                    report.seed = int(value)
                elif key == "config_digest":
                    digest = value
            continue
        if row[4] == "":
            report.rows.append(EvalRow(row[0], row[1], row[2], row[3], None))
            continue
        result = CellResult(
            mean_accuracy=float(row[4]),
            fold_accuracies=[float(a) for a in row[5].split(";") if a],
            confusion={"tp": int(row[6]), "tn": int(row[7]),
                       "fp": int(row[8]), "fn": int(row[9])},
            n_samples=int(row[10]),
            failed_folds=list(range(int(row[11]))),
            seed=0,
        )
        report.rows.append(EvalRow(row[0], row[1], row[2], row[3], result,
                                   best_in_group=bool(int(row[12]))))
    return report, digest


def render_report_markdown(report: EvalReport, digest: str = "",
                           classifiers=CLASSIFIERS) -> str:
    """Markdown table in the published row/column scheme."""
    lines = []
    caption = report_caption(report.mode)
    if caption:
        lines.append(f"**{caption}**")
        lines.append("")
    header = ["Task Type", "Task#", "Feature Type", *classifiers]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] * len(header)) + "|")

    by_cell = {}
    order = []
    for row in report.rows:
        key = (row.task_type, row.tasks_label, row.feature_set)
        if key not in by_cell:
            by_cell[key] = {}
            order.append(key)
        by_cell[key][row.classifier] = row

    last_type = None
    last_label = None
    for task_type, tasks_label, feature_set in order:
        cells = by_cell[(task_type, tasks_label, feature_set)]
        type_col = task_type if task_type != last_type else ""
        label_col = tasks_label if (tasks_label != last_label or type_col) else ""
        last_type, last_label = task_type, tasks_label
        rendered = []
        for kind in classifiers:
            row = cells.get(kind)
            if row is None or row.result is None:
                rendered.append("-")
            else:
                text = f"{row.result.mean_accuracy:.2f}"
                rendered.append(f"**{text}**" if row.best_in_group else text)
        lines.append("| " + " | ".join([type_col, label_col, feature_set, *rendered]) + " |")
    lines.append("")
    lines.append(f"_mode={report.mode} seed={report.seed} config_digest={digest}_")
    lines.append("")
    return "\n".join(lines)


def write_report_markdown(report: EvalReport, path, digest: str = "",
                          classifiers=CLASSIFIERS) -> None:
    Path(path).write_text(render_report_markdown(report, digest, classifiers),
                          encoding="utf-8")


# ----------------------------------------------------------------------
# occurrence histogram SVG

_GROUP_FILL = {"P": "#4878d0", "A": "#ee854a", "personal": "#6acc64"}
_GROUP_TITLES = {"P": "on-paper", "A": "in-air", "personal": "personal"}


def render_histogram_svg(hist: OccurrenceHistogram, max_count: int = 2) -> str:
    """Deterministic bar chart: one bar per feature (height = selection
    count), features in schema order, colored by P/A/personal block."""
    bar_w, gap, left, bottom, top = 14, 4, 42, 150, 28
    plot_h = 90
    names = list(hist.counts)
    width = left + len(names) * (bar_w + gap) + 20
    height = top + plot_h + bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{left}" y="16" font-family="sans-serif" font-size="13" '
        f'font-weight="bold">{hist.category}: feature occurrence across the '
        f'category tasks (AL set)</text>',
    ]
    # y axis with one gridline per count value
    for count in range(max_count + 1):
        y = top + plot_h - plot_h * count / max_count
        parts.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{width - 12}" '
                     f'y2="{y:.1f}" stroke="#cccccc" stroke-width="1"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" font-family="sans-serif" '
                     f'font-size="10" text-anchor="end">{count}</text>')
    for i, name in enumerate(names):
        count = hist.counts[name]
        group = hist.groups[name]
        x = left + i * (bar_w + gap)
        h = plot_h * count / max_count
        y = top + plot_h - h
        parts.append(f'<rect x="{x}" y="{y:.1f}" width="{bar_w}" height="{h:.1f}" '
                     f'fill="{_GROUP_FILL[group]}"/>')
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{top + plot_h + 6}" '
            f'font-family="sans-serif" font-size="8" text-anchor="end" '
            f'transform="rotate(-60 {x + bar_w / 2:.1f} {top + plot_h + 6})">{name}</text>')
    legend_x = left
    for j, group in enumerate(("P", "A", "personal")):
        x = legend_x + j * 110
        y = height - 12
        parts.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" '
                     f'fill="{_GROUP_FILL[group]}"/>')
        parts.append(f'<text x="{x + 14}" y="{y}" font-family="sans-serif" '
                     f'font-size="10">{_GROUP_TITLES[group]}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_histogram_svg(hist: OccurrenceHistogram, path) -> None:
    Path(path).write_text(render_histogram_svg(hist), encoding="utf-8")


def load_histogram_csv(path) -> OccurrenceHistogram:
    path = Path(path)
    hist = OccurrenceHistogram(category=path.stem.replace("occurrence_", ""))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["feature", "group", "count"]:
            raise ParseError(f"{path.name}: bad header {header!r}")
        for row in reader:
            if not row:
                continue
            hist.counts[row[0]] = int(row[2])
            hist.groups[row[0]] = row[1]
    return hist
