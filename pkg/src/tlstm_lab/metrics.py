"""Multi-label confusion accounting and predictive-value measures.

Per label we report PPV (= precision), NPV, recall and the F-measure
(harmonic mean of precision and recall), plus macro averages.  Ratios with a
zero denominator are marked undefined (NaN) and excluded from the macro
average; the number of exclusions is reported rather than silently zeroed.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfusionCounts",
    "MetricsReport",
    "confusion",
    "ppv_npv_f",
    "report_to_csv",
    "report_to_markdown",
]

METRIC_ROWS = ("PPV", "NPV", "F-measure")


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-label TP/FP/TN/FN over a fixed evaluation set."""

    tp: np.ndarray
    fp: np.ndarray
    tn: np.ndarray
    fn: np.ndarray

    def __post_init__(self):
        shapes = {a.shape for a in (self.tp, self.fp, self.tn, self.fn)}
        if len(shapes) != 1:
            raise ValueError(f"count arrays disagree in shape: {shapes}")
        totals = self.tp + self.fp + self.tn + self.fn
        if len(set(totals.tolist())) != 1:
            raise ValueError(f"per-label totals differ: {totals}")

    @property
    def n_labels(self):
        return self.tp.shape[0]

    @property
    def n_samples(self):
        return int(self.tp[0] + self.fp[0] + self.tn[0] + self.fn[0])


def confusion(probs, targets, threshold=0.5):
    """Tally confusion counts; a prediction is positive iff prob >= threshold."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets)
    if probs.shape != targets.shape or probs.ndim != 2:
        raise ValueError(
            f"probs shape {probs.shape} and targets shape {targets.shape} "
            "must be equal 2-D (samples, labels)"
        )
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    pred = probs >= threshold
    pos = targets > 0.5
    tp = np.sum(pred & pos, axis=0).astype(np.int64)
    fp = np.sum(pred & ~pos, axis=0).astype(np.int64)
    fn = np.sum(~pred & pos, axis=0).astype(np.int64)
    tn = np.sum(~pred & ~pos, axis=0).astype(np.int64)
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _safe_div(num, den):
    num = num.astype(np.float64)
    den = den.astype(np.float64)
    out = np.full(num.shape, np.nan)
    np.divide(num, den, out=out, where=den > 0)
    return out


@dataclass(frozen=True)
class MetricsReport:
    """Per-label measures (NaN = undefined) plus macro averages."""

    counts: ConfusionCounts
    ppv: np.ndarray
    npv: np.ndarray
    recall: np.ndarray
    f_measure: np.ndarray
    macro: dict  # metric name -> (mean over defined labels, #labels skipped)

    @property
    def precision(self):
        return self.ppv


def ppv_npv_f(counts):
    """Predictive values and F-measure from confusion counts."""
    ppv = _safe_div(counts.tp, counts.tp + counts.fp)
    npv = _safe_div(counts.tn, counts.tn + counts.fn)
    recall = _safe_div(counts.tp, counts.tp + counts.fn)
    pr_sum = ppv + recall
    f = np.full(ppv.shape, np.nan)
    ok = np.isfinite(pr_sum) & (pr_sum > 0)
    f[ok] = 2.0 * ppv[ok] * recall[ok] / pr_sum[ok]
    macro = {}
    for name, values in (("PPV", ppv), ("NPV", npv), ("recall", recall), ("F-measure", f)):
        defined = values[np.isfinite(values)]
        mean = float(defined.mean()) if defined.size else float("nan")
        macro[name] = (mean, int(values.size - defined.size))
    return MetricsReport(counts=counts, ppv=ppv, npv=npv, recall=recall, f_measure=f, macro=macro)


def _fmt(v):
    return "NA" if not np.isfinite(v) else f"{v:.4f}"


def report_to_csv(report, label_names, config_hash=""):
    """CSV dump: one row per label plus a macro row, raw counts included."""
    counts = report.counts
    buf = io.StringIO()
    if config_hash:
        buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "tp", "fp", "tn", "fn", "ppv", "npv", "recall", "f_measure"])
    for k, name in enumerate(label_names):
        writer.writerow(
            [
                name,
                int(counts.tp[k]),
                int(counts.fp[k]),
                int(counts.tn[k]),
                int(counts.fn[k]),
                _fmt(report.ppv[k]),
                _fmt(report.npv[k]),
                _fmt(report.recall[k]),
                _fmt(report.f_measure[k]),
            ]
        )
    macro_row = ["macro_avg", "", "", "", ""]
    skips = 0
    for metric in ("PPV", "NPV", "recall", "F-measure"):
        mean, skipped = report.macro[metric]
        macro_row.append(_fmt(mean))
        skips += skipped
    writer.writerow(macro_row)
    writer.writerow(["undefined_labels_skipped", skips, "", "", "", "", "", "", ""])
    return buf.getvalue()


def report_to_markdown(report, label_names, title):
    """Markdown table in the usual results layout: metric rows, label columns."""
    header = [f"**{title}**"] + [str(n) for n in label_names] + ["avg."]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
    ]
    by_row = {
        "PPV": report.ppv,
        "NPV": report.npv,
        "F-measure": report.f_measure,
    }
    for metric in METRIC_ROWS:
        values = by_row[metric]
        mean, _ = report.macro[metric]
        cells = [metric] + [_fmt(v) for v in values] + [_fmt(mean)]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)
