"""Report emission: flat tables, the SNR pivot, per-curve series and SVG plots."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

from .experiment import AccuracyRow, EvaluationReport, TimingRow

FORMATS = ("csv", "json", "markdown")
ROW_COLUMNS = tuple(f.name for f in dataclasses.fields(AccuracyRow))
TIMING_COLUMNS = tuple(f.name for f in dataclasses.fields(TimingRow))
PIVOT_SNRS = (-10.0, 0.0, 10.0, 20.0, 30.0)


class ReportError(OSError):
    pass


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _sorted_rows(report: EvaluationReport) -> list[AccuracyRow]:
    return sorted(report.rows, key=lambda r: (r.classifier, r.beamformer, r.tdoa, r.variant, r.snr_db))


def rows_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_COLUMNS)
    for r in _sorted_rows(report):
        w.writerow([_fmt(v) for v in r.as_tuple()])
    return buf.getvalue()


def timing_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMING_COLUMNS)
    for t in report.timing:
        w.writerow([_fmt(v) for v in dataclasses.astuple(t)])
    return buf.getvalue()


def pivot(report: EvaluationReport, snrs=PIVOT_SNRS) -> list[dict]:
    """Rows keyed by (variant, classifier, beamformer, tdoa), one column per SNR.

    Cells absent from the report are None; failed cells hold NaN.
    """
    snrs = [float(s) for s in snrs]
    index: dict = {}
    for r in report.rows:
        index[(r.variant, r.classifier, r.beamformer, r.tdoa, r.snr_db)] = r
    keys = sorted({k[:4] for k in index}, key=lambda k: (k[0] != "original", k[0], k[1], k[2], k[3]))
    table = []
    for variant, clf, bf, tdoa in keys:
        cells = {}
        for s in snrs:
            r = index.get((variant, clf, bf, tdoa, s))
            cells[s] = None if r is None else (r.mean_accuracy, r.std_accuracy)
        table.append({"variant": variant, "classifier": clf, "beamformer": bf, "tdoa": tdoa,
                      "cells": cells})
    return table


def pivot_markdown(report: EvaluationReport, snrs=PIVOT_SNRS) -> str:
    snrs = [float(s) for s in snrs]
    head = ["variant", "classifier", "beamformer"] + [f"{s:g} dB" for s in snrs]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for row in pivot(report, snrs):
        bf = row["beamformer"] if row["tdoa"] in ("-", "xcorr") else f"{row['beamformer']} ({row['tdoa']})"
        vals = []
        for s in snrs:
            c = row["cells"][s]
            if c is None:
                vals.append("")
            elif math.isnan(c[0]):
                vals.append("failed")
            else:
                vals.append(f"{c[0]:.3f} ± {c[1]:.3f}")
        lines.append("| " + " | ".join([row["variant"], row["classifier"], bf] + vals) + " |")
    return "\n".join(lines) + "\n"


def report_markdown(report: EvaluationReport) -> str:
    parts = ["# Accuracy by SNR\n", pivot_markdown(report)]
    if report.timing:
        parts.append("\n# Timing\n")
        parts.append("| stage | mean (ms) | std (ms) | n |\n|---|---|---|---|")
        for t in report.timing:
            parts.append(f"| {t.stage} | {t.mean_ms:.4f} | {t.std_ms:.4f} | {t.n_samples} |")
        parts.append("")
    if report.ratios:
        parts.append("\n# Ratios\n")
        parts.extend(f"- {k}: {v:.3f}" for k, v in sorted(report.ratios.items()))
        parts.append("")
    if report.failures:
        parts.append("\n# Failures\n")
        parts.extend(f"- {f['classifier']}/{f['variant']}: {f['error']}" for f in report.failures)
        parts.append("")
    return "\n".join(parts)


def series(report: EvaluationReport) -> dict:
    """Sorted (snr, mean, std) points per ``classifier_beamformer[_tdoa]_variant``."""
    out: dict = {}
    for r in _sorted_rows(report):
        name = "_".join([r.classifier, r.beamformer] + ([] if r.tdoa == "-" else [r.tdoa]) + [r.variant])
        out.setdefault(name, []).append((r.snr_db, r.mean_accuracy, r.std_accuracy))
    return out


def plot_svg(report: EvaluationReport, path, variant: str | None = None) -> Path:
    """Accuracy-vs-SNR line chart, one line per curve."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, pts in series(report).items():
        if variant is not None and not name.endswith("_" + variant):
            continue
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", markersize=3, label=name)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("audio accuracy")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_report(report: EvaluationReport, out_dir, formats=FORMATS, plots: bool = True) -> list[Path]:
    """Write the report in each format and return the created files."""
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        raise ValueError(f"unknown report format(s) {bad}; choose from {', '.join(FORMATS)}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []

        def put(name, text):
            p = out / name
            p.write_text(text)
            written.append(p)

        if "csv" in formats:
            put("accuracy.csv", rows_csv(report))
            if report.timing:
                put("timing.csv", timing_csv(report))
            sdir = out / "series"
            sdir.mkdir(exist_ok=True)
            for name, pts in series(report).items():
                buf = io.StringIO()
                w = csv.writer(buf, lineterminator="\n")
                w.writerow(("snr_db", "mean_accuracy", "std_accuracy"))
                w.writerows([_fmt(v) for v in p] for p in pts)
                put(f"series/{name}.csv", buf.getvalue())
        if "json" in formats:
            d = report.to_dict()
            d["rows"] = [dataclasses.asdict(r) for r in _sorted_rows(report)]
            put("report.json", json.dumps(d, indent=1, sort_keys=True))
        if "markdown" in formats:
            put("report.md", report_markdown(report))
        if plots and report.rows:
            for variant in sorted({r.variant for r in report.rows}):
                written.append(plot_svg(report, out / f"accuracy_{variant}.svg", variant))
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return written


def load_report(path) -> EvaluationReport:
    return EvaluationReport.from_dict(json.loads(Path(path).read_text()))
