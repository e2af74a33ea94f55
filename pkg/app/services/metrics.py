import logging
from pathlib import Path
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence

from app.core.exceptions import MetricsError
from app.models.report_models import ClassMetrics, EvalReport
from app.utils.format_helpers import FormatHelper

logger = logging.getLogger(__name__)


def _ratio(numerator: float, denominator: float) -> float:
    # zero denominators score 0
    return numerator / denominator if denominator else 0.0


def _f1(precision: float, recall: float) -> float:
    if precision == recall:
        # harmonic mean of equal values, without rounding drift
        return precision
    return _ratio(2.0 * precision * recall, precision + recall)


def _check(predictions: Sequence[Hashable], labels: Sequence[Hashable]) -> None:
    if len(predictions) != len(labels):
        raise MetricsError(f"Got {len(predictions)} predictions for {len(labels)} labels")
    if not labels:
        raise MetricsError("Cannot score an empty prediction set")


def class_counts(
    predictions: Sequence[Hashable],
    labels: Sequence[Hashable],
    classes: Optional[Sequence[Hashable]] = None,
) -> List[ClassMetrics]:
    """One-vs-rest TP/FP/FN/TN and P/R/F1 per class, classes sorted by name"""
    _check(predictions, labels)
    if classes is None:
        classes = sorted(set(labels) | set(predictions), key=str)
    total = len(labels)
    rows = []
    for label in classes:
        tp = sum(1 for p, y in zip(predictions, labels) if p == label and y == label)
        fp = sum(1 for p, y in zip(predictions, labels) if p == label and y != label)
        fn = sum(1 for p, y in zip(predictions, labels) if p != label and y == label)
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        rows.append(ClassMetrics(
            label=str(label),
            tp=tp,
            fp=fp,
            fn=fn,
            tn=total - tp - fp - fn,
            precision=precision,
            recall=recall,
            f1=_f1(precision, recall),
        ))
    return rows


def _micro(rows: List[ClassMetrics]) -> float:
    tp = sum(row.tp for row in rows)
    fp = sum(row.fp for row in rows)
    fn = sum(row.fn for row in rows)
    return _f1(_ratio(tp, tp + fp), _ratio(tp, tp + fn))


def _macro(rows: List[ClassMetrics], label_set: Iterable[Hashable]) -> float:
    # classes only ever predicted add false positives to micro but no macro term
    names = {str(label) for label in label_set}
    scored = [row for row in rows if row.label in names]
    if not scored:
        raise MetricsError("No class of the label set has a metrics row")
    return sum(row.f1 for row in scored) / len(scored)


def micro_f1(predictions: Sequence[Hashable], labels: Sequence[Hashable]) -> float:
    """F1 of counts pooled over all classes; equals accuracy for single-label data"""
    return _micro(class_counts(predictions, labels))


def macro_f1(predictions: Sequence[Hashable], labels: Sequence[Hashable]) -> float:
    """Unweighted mean of per-class F1 over the classes in labels, including ones never predicted"""
    return _macro(class_counts(predictions, labels), labels)


def evaluate(
    predictions: Sequence[Hashable],
    labels: Sequence[Hashable],
    classes: Optional[Sequence[Hashable]] = None,
) -> EvalReport:
    """Per-class rows plus micro and macro F1; classes, when given, is the label set macro averages over"""
    rows = class_counts(predictions, labels, classes)
    report = EvalReport(
        classes=rows,
        micro_f1=_micro(rows),
        macro_f1=_macro(rows, labels if classes is None else classes),
        samples=len(labels),
    )
    logger.info(
        f"Evaluated {report.samples} predictions over {len(rows)} classes: "
        f"micro-F1={report.micro_f1:.4f}, macro-F1={report.macro_f1:.4f}"
    )
    return report


REPORT_COLUMNS = ["label", "tp", "fp", "fn", "tn", "precision", "recall", "f1"]


def report_rows(report: EvalReport) -> List[List[Any]]:
    """Per-class rows followed by the summary rows"""
    rows: List[List[Any]] = [
        [row.label, row.tp, row.fp, row.fn, row.tn, row.precision, row.recall, row.f1]
        for row in report.classes
    ]
    rows.append(["#micro", "", "", "", "", "", "", report.micro_f1])
    rows.append(["#macro", "", "", "", "", "", "", report.macro_f1])
    return rows


def write_report_tsv(report: EvalReport, path: Path, config: Optional[Dict[str, Any]] = None) -> Path:
    return FormatHelper.write_tsv(path, REPORT_COLUMNS, report_rows(report), config)


def format_report(report: EvalReport) -> str:
    """Human-readable table for terminals"""
    width = max([len("class")] + [len(row.label) for row in report.classes])
    lines = [f"{'class':<{width}}  precision  recall     f1  support"]
    for row in report.classes:
        lines.append(
            f"{row.label:<{width}}  {row.precision:9.4f}  {row.recall:6.4f}  {row.f1:6.4f}  {row.support:7d}"
        )
    lines.append("")
    lines.append(f"micro-F1  {report.micro_f1:.4f}")
    lines.append(f"macro-F1  {report.macro_f1:.4f}")
    lines.append(f"samples   {report.samples}")
    return "\n".join(lines)
