"""Classification evaluation and two-tailed t-tests from summary statistics.

The t-test p-values are computed through the regularized incomplete beta
function (continued-fraction evaluation), so every p-value reported in
the source tables can be reproduced from (mean, sd, n) triples alone.
The two-sample test pools variances (df = n1 + n2 - 2); the one-sample
test compares replicate means against a fixed benchmark value (df = n - 1).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CLASS_LABELS, normalize_label
from .errors import DataError


@dataclass(frozen=True)
class SummaryStat:
    """Replicate summary: mean, sample standard deviation (n-1), count."""

    mean: float
    sd: float
    n: int

    def __post_init__(self):
        if self.sd < 0:
            raise DataError(f"sd must be >= 0, got {self.sd}")
        if self.n < 1:
            raise DataError(f"n must be >= 1, got {self.n}")

    @classmethod
    def from_values(cls, values) -> "SummaryStat":
        arr = np.asarray(values, dtype=np.float64)
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return cls(mean=float(arr.mean()), sd=sd, n=int(arr.size))


@dataclass
class PredictionSet:
    rows: list[tuple[str, str, str]]  # (id, true, pred)

    def __post_init__(self):
        seen = set()
        normalized = []
        for rid, true, pred in self.rows:
            if rid in seen:
                raise DataError(f"duplicate prediction id {rid!r}")
            seen.add(rid)
            normalized.append((rid, normalize_label(true), normalize_label(pred)))
        self.rows = normalized

    @classmethod
    def from_csv(cls, path: str | Path) -> "PredictionSet":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty predictions file")
            if [h.strip().lower() for h in header[:3]] != ["id", "true", "pred"]:
                raise DataError(f"{path}: expected header id,true,pred")
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) < 3:
                    raise DataError(f"{path}:{line_no}: short row")
                rows.append((row[0], row[1], row[2]))
        return cls(rows=rows)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "true", "pred"])
            writer.writerows(self.rows)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (6, 6) int64; rows = true, columns = predicted
    labels: tuple[str, ...] = CLASS_LABELS

    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """Row-normalized view; rows with zero support stay all-zero."""
        counts = self.counts.astype(np.float64)
        sums = counts.sum(axis=1, keepdims=True)
        out = np.zeros_like(counts)
        np.divide(counts, sums, out=out, where=sums > 0)
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\pred", *self.labels])
            for lbl, row in zip(self.labels, self.counts):
                writer.writerow([lbl, *row.tolist()])


@dataclass
class EvalReport:
    accuracy: float  # percent
    macro_f1: float  # percent
    per_class_recall: dict[str, float]  # percent; zero-support rows -> 0
    confusion: ConfusionMatrix
    per_class_precision: dict[str, float] = field(default_factory=dict)
    per_class_f1: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "accuracy": self.accuracy,
                "macro_f1": self.macro_f1,
                "per_class_recall": self.per_class_recall,
                "per_class_precision": self.per_class_precision,
                "per_class_f1": self.per_class_f1,
                "confusion": self.confusion.counts.tolist(),
                "labels": list(self.confusion.labels),
            },
            sort_keys=True,
            indent=2,
        )

    def to_text(self) -> str:
        lines = [
            f"accuracy : {self.accuracy:7.2f}",
            f"macro F1 : {self.macro_f1:7.2f}",
            "",
            f"{'class':<6} {'recall':>8} {'precision':>10} {'F1':>8}",
        ]
        for lbl in self.confusion.labels:
            lines.append(
                f"{lbl:<6} {self.per_class_recall[lbl]:8.2f} "
                f"{self.per_class_precision[lbl]:10.2f} {self.per_class_f1[lbl]:8.2f}"
            )
        return "\n".join(lines) + "\n"


def confusion(preds: PredictionSet) -> ConfusionMatrix:
    if not preds.rows:
        raise DataError("empty prediction set")
    index = {lbl: i for i, lbl in enumerate(CLASS_LABELS)}
    counts = np.zeros((len(CLASS_LABELS), len(CLASS_LABELS)), dtype=np.int64)
    for _, true, pred in preds.rows:
        counts[index[true], index[pred]] += 1
    return ConfusionMatrix(counts=counts)


def report(cm: ConfusionMatrix) -> EvalReport:
    """Accuracy, per-class recall/precision/F1 and macro F1, all in percent."""
    counts = cm.counts
    total = counts.sum()
    if total < 1:
        raise DataError("confusion matrix has no entries")
    diag = np.diag(counts).astype(np.float64)
    row_sums = counts.sum(axis=1).astype(np.float64)
    col_sums = counts.sum(axis=0).astype(np.float64)

    recall = np.divide(diag, row_sums, out=np.zeros_like(diag), where=row_sums > 0)
    precision = np.divide(diag, col_sums, out=np.zeros_like(diag), where=col_sums > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros_like(diag), where=pr > 0)

    return EvalReport(
        accuracy=100.0 * float(diag.sum()) / float(total),
        macro_f1=100.0 * float(f1.mean()),
        per_class_recall={l: 100.0 * float(r) for l, r in zip(cm.labels, recall)},
        confusion=cm,
        per_class_precision={
            l: 100.0 * float(p) for l, p in zip(cm.labels, precision)
        },
        per_class_f1={l: 100.0 * float(v) for l, v in zip(cm.labels, f1)},
    )


# --- Student's t machinery ------------------------------------------------

_BETA_EPS = 1e-14
_BETA_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise DataError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), absolute error <= 1e-8."""
    if a <= 0 or b <= 0:
        raise DataError("betainc requires a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # The continued fraction converges fast only on one side of the mean.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    """Student's t cumulative distribution via I_x(df/2, 1/2)."""
    if df < 1:
        raise DataError(f"df must be >= 1, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * betainc(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def _two_tailed_p(t_abs: float, df: float) -> float:
    return 2.0 * (1.0 - student_t_cdf(t_abs, df))


def t_test_two_sample(a: SummaryStat, b: SummaryStat) -> float:
    """Two-tailed pooled-variance Student's t from summary statistics.

    Both-zero variance is degenerate: p = 1 for equal means, 0 otherwise.
    """
    if a.n < 2 or b.n < 2:
        raise DataError("two-sample t-test needs n >= 2 in both groups")
    df = a.n + b.n - 2
    sp2 = ((a.n - 1) * a.sd**2 + (b.n - 1) * b.sd**2) / df
    se = math.sqrt(sp2 * (1.0 / a.n + 1.0 / b.n))
    diff = abs(a.mean - b.mean)
    if se == 0.0:
        return 1.0 if diff == 0.0 else 0.0
    return _two_tailed_p(diff / se, df)


def t_test_one_sample(a: SummaryStat, mu: float) -> float:
    """Two-tailed one-sample Student's t against a fixed benchmark value."""
    if a.n < 2:
        raise DataError("one-sample t-test needs n >= 2")
    diff = abs(a.mean - mu)
    if a.sd == 0.0:
        return 1.0 if diff == 0.0 else 0.0
    t = diff / (a.sd / math.sqrt(a.n))
    return _two_tailed_p(t, a.n - 1)
