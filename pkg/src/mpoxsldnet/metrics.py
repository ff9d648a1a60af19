"""Evaluation metrics: confusion matrix, classification report, ROC/AUC,
multi-run aggregation, and learning-curve export (CSV + SVG).

The positive class throughout is the one encoded 0 (Monkeypox under the
lexicographic class map); ROC scores are that class's sigmoid output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


# ---------------------------------------------------------------------------
# confusion matrix and report

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


def confusion(labels, predictions, positive_label: int = 0) -> ConfusionMatrix:
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.shape != predictions.shape:
        raise ValueError(
            f"labels length {labels.shape} != predictions length {predictions.shape}")
    values = set(np.unique(labels)) | set(np.unique(predictions))
    if not values <= {0, 1}:
        raise ValueError(f"labels/predictions must be binary 0/1, got {sorted(values)}")
    pos_l = labels == positive_label
    pos_p = predictions == positive_label
    return ConfusionMatrix(
        tp=int(np.sum(pos_l & pos_p)),
        fn=int(np.sum(pos_l & ~pos_p)),
        fp=int(np.sum(~pos_l & pos_p)),
        tn=int(np.sum(~pos_l & ~pos_p)),
    )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool = False  # some denominator was zero


@dataclass(frozen=True)
class ClassificationReport:
    per_class: dict[str, ClassMetrics]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float, bool]:
    degenerate = False
    if tp + fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1, degenerate


def report(cm: ConfusionMatrix,
           class_names: tuple[str, str] = ("Monkeypox", "Non_Monkeypox")
           ) -> ClassificationReport:
    """Per-class precision/recall/F1 plus accuracy and macro averages.

    Zero denominators yield 0 with the class flagged degenerate rather than
    raising.  Values are kept at full precision; rounding happens at render.
    """
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")
    pos = _prf(cm.tp, cm.fp, cm.fn)
    # class 1 counts are the matrix viewed from the other side
    neg = _prf(cm.tn, cm.fn, cm.fp)
    per_class = {
        class_names[0]: ClassMetrics(*pos[:3], support=cm.tp + cm.fn,
                                     degenerate=pos[3]),
        class_names[1]: ClassMetrics(*neg[:3], support=cm.tn + cm.fp,
                                     degenerate=neg[3]),
    }
    return ClassificationReport(
        per_class=per_class,
        accuracy=(cm.tp + cm.tn) / cm.total,
        macro_precision=(pos[0] + neg[0]) / 2.0,
        macro_recall=(pos[1] + neg[1]) / 2.0,
        macro_f1=(pos[2] + neg[2]) / 2.0,
    )


def render_report_text(rep: ClassificationReport, cm: ConfusionMatrix | None = None,
                       auc: float | None = None) -> str:
    lines = [f"{'class':<16} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>9}"]
    for name, m in rep.per_class.items():
        lines.append(f"{name:<16} {m.precision:>9.2f} {m.recall:>9.2f} "
                     f"{m.f1:>9.2f} {m.support:>9}")
    lines.append(f"{'macro avg':<16} {rep.macro_precision:>9.2f} "
                 f"{rep.macro_recall:>9.2f} {rep.macro_f1:>9.2f} "
                 f"{sum(m.support for m in rep.per_class.values()):>9}")
    lines.append(f"accuracy: {rep.accuracy:.4f}")
    if auc is not None:
        lines.append(f"auc: {auc:.4f}")
    if cm is not None:
        lines.append(f"confusion: tp={cm.tp} fn={cm.fn} fp={cm.fp} tn={cm.tn}")
    return "\n".join(lines)


def write_report_csv(rep: ClassificationReport, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "precision", "recall", "f1", "support"])
        for name, m in rep.per_class.items():
            writer.writerow([name, f"{m.precision:.6f}", f"{m.recall:.6f}",
                             f"{m.f1:.6f}", m.support])
        writer.writerow(["macro", f"{rep.macro_precision:.6f}",
                         f"{rep.macro_recall:.6f}", f"{rep.macro_f1:.6f}",
                         sum(m.support for m in rep.per_class.values())])
        writer.writerow(["accuracy", f"{rep.accuracy:.6f}", "", "", ""])


# ---------------------------------------------------------------------------
# ROC / AUC

@dataclass(frozen=True)
class RocCurve:
    fpr: tuple[float, ...]
    tpr: tuple[float, ...]
    thresholds: tuple[float, ...]
    auc: float


def roc_auc(scores, labels, positive_label: int = 0) -> RocCurve:
    """ROC by descending-threshold sweep with tied scores grouped, AUC by the
    trapezoidal rule.  Equals P(score+ > score-) + 0.5 * P(score+ == score-).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"scores shape {scores.shape} != labels shape {labels.shape}")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    positive = labels == positive_label
    p = int(positive.sum())
    n = int(len(labels) - p)
    if p == 0 or n == 0:
        raise ValueError("AUC undefined: both classes must be present")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    is_pos = positive[order]
    fpr = [0.0]
    tpr = [0.0]
    thresholds = []
    tp = fp = 0
    i = 0
    while i < len(s):
        j = i
        while j < len(s) and s[j] == s[i]:
            j += 1
        tp += int(is_pos[i:j].sum())
        fp += (j - i) - int(is_pos[i:j].sum())
        thresholds.append(float(s[i]))
        fpr.append(fp / n)
        tpr.append(tp / p)
        i = j
    auc = 0.0
    for k in range(1, len(fpr)):
        auc += (fpr[k] - fpr[k - 1]) * (tpr[k] + tpr[k - 1]) / 2.0
    return RocCurve(fpr=tuple(fpr), tpr=tuple(tpr),
                    thresholds=tuple(thresholds), auc=auc)


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["fpr", "tpr"])
        for x, y in zip(curve.fpr, curve.tpr):
            writer.writerow([f"{x:.6f}", f"{y:.6f}"])


# ---------------------------------------------------------------------------
# run histories

@dataclass
class RunHistory:
    run_id: int
    seed: int
    train_acc: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.train_acc)


@dataclass(frozen=True)
class RunSummary:
    runs: int
    mean_train_acc: float
    min_train_acc: float
    max_train_acc: float
    mean_val_acc: float
    min_val_acc: float
    max_val_acc: float
    mean_train_loss: float
    mean_val_loss: float


def aggregate_runs(histories: list[RunHistory]) -> RunSummary:
    """Mean/min/max of the final-epoch metrics across runs."""
    if not histories:
        raise ValueError("need at least one run history")
    ta = [h.train_acc[-1] for h in histories]
    va = [h.val_acc[-1] for h in histories]
    tl = [h.train_loss[-1] for h in histories]
    vl = [h.val_loss[-1] for h in histories]
    return RunSummary(
        runs=len(histories),
        mean_train_acc=sum(ta) / len(ta), min_train_acc=min(ta), max_train_acc=max(ta),
        mean_val_acc=sum(va) / len(va), min_val_acc=min(va), max_val_acc=max(va),
        mean_train_loss=sum(tl) / len(tl), mean_val_loss=sum(vl) / len(vl),
    )


def write_history_csv(history: RunHistory, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_acc", "train_loss", "val_acc", "val_loss"])
        for e in range(history.epochs):
            writer.writerow([e + 1,
                             f"{history.train_acc[e]:.6f}",
                             f"{history.train_loss[e]:.6f}",
                             f"{history.val_acc[e]:.6f}",
                             f"{history.val_loss[e]:.6f}"])


def read_history_csv(path, run_id: int = 0, seed: int = 0) -> RunHistory:
    history = RunHistory(run_id=run_id, seed=seed)
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            history.train_acc.append(float(row["train_acc"]))
            history.train_loss.append(float(row["train_loss"]))
            history.val_acc.append(float(row["val_acc"]))
            history.val_loss.append(float(row["val_loss"]))
    return history


# ---------------------------------------------------------------------------
# SVG line charts

def _svg_chart(series: dict[str, list[float]], title: str, path,
               width: int = 640, height: int = 400) -> None:
    """Minimal SVG chart: one polyline per series, padded y range, legend."""
    margin = 50
    values = [v for ys in series.values() for v in ys]
    lo, hi = min(values), max(values)
    pad = max(0.05 * (hi - lo), 0.05)
    lo, hi = lo - pad, hi + pad
    n = max(len(ys) for ys in series.values())
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]

    def px(i: int) -> float:
        if n == 1:
            return margin + (width - 2 * margin) / 2.0
        return margin + (width - 2 * margin) * i / (n - 1)

    def py(v: float) -> float:
        return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<text x="{margin - 8}" y="{py(lo):.1f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{lo:.3f}</text>',
        f'<text x="{margin - 8}" y="{py(hi):.1f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{hi:.3f}</text>',
    ]
    for k, (name, ys) in enumerate(series.items()):
        pts = " ".join(f"{px(i):.2f},{py(v):.2f}" for i, v in enumerate(ys))
        color = colors[k % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{width - margin:.1f}" y="{margin + 14 * k}" '
                     f'text-anchor="end" font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def export_curves(history: RunHistory, out_dir, stem: str = "curves") -> dict[str, Path]:
    """Write <stem>.csv plus accuracy and loss SVG charts into out_dir."""
    if history.epochs == 0:
        raise ValueError("history is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out_dir / f"{stem}.csv",
        "accuracy_svg": out_dir / f"{stem}_accuracy.svg",
        "loss_svg": out_dir / f"{stem}_loss.svg",
    }
    write_history_csv(history, paths["csv"])
    _svg_chart({"train_acc": history.train_acc, "val_acc": history.val_acc},
               "accuracy per epoch", paths["accuracy_svg"])
    _svg_chart({"train_loss": history.train_loss, "val_loss": history.val_loss},
               "loss per epoch", paths["loss_svg"])
    return paths
