import math

import numpy as np
import pytest
from scipy import integrate, stats

from hybridaug.corpus import CLASS_LABELS
from hybridaug.errors import DataError
from hybridaug.metrics import (
    ConfusionMatrix,
    PredictionSet,
    SummaryStat,
    betainc,
    confusion,
    report,
    student_t_cdf,
    t_test_one_sample,
    t_test_two_sample,
)


def preds_from(rows):
    return PredictionSet(rows=[(f"id{i}", t, p) for i, (t, p) in enumerate(rows)])


# --- confusion -------------------------------------------------------------


def test_confusion_all_correct_is_diagonal():
    rows = [(lbl, lbl) for lbl in CLASS_LABELS for _ in range(3)]
    cm = confusion(preds_from(rows))
    assert cm.counts.sum() == 18
    assert np.array_equal(cm.counts, np.diag(np.diag(cm.counts)))


def test_confusion_single_offdiagonal():
    cm = confusion(preds_from([("A4C", "NT")]))
    i, j = CLASS_LABELS.index("A4C"), CLASS_LABELS.index("NT")
    assert cm.counts[i, j] == 1
    assert cm.counts.sum() == 1


def test_confusion_matches_bruteforce():
    rng = np.random.default_rng(0)
    rows = [
        (CLASS_LABELS[int(rng.integers(6))], CLASS_LABELS[int(rng.integers(6))])
        for _ in range(1000)
    ]
    cm = confusion(preds_from(rows))
    for i, ti in enumerate(CLASS_LABELS):
        for j, pj in enumerate(CLASS_LABELS):
            expected = sum(1 for t, p in rows if t == ti and p == pj)
            assert cm.counts[i, j] == expected


def test_confusion_normalized_rows():
    rng = np.random.default_rng(1)
    rows = [
        (CLASS_LABELS[int(rng.integers(5))], CLASS_LABELS[int(rng.integers(6))])
        for _ in range(200)
    ]
    cm = confusion(preds_from(rows))
    norm = cm.normalized()
    sums = norm.sum(axis=1)
    for i, lbl in enumerate(CLASS_LABELS):
        if cm.counts[i].sum() > 0:
            assert sums[i] == pytest.approx(1.0, abs=1e-9)
        else:
            assert sums[i] == 0.0  # zero-support rows stay empty, not NaN


def test_duplicate_prediction_ids_rejected():
    with pytest.raises(DataError):
        PredictionSet(rows=[("a", "NT", "NT"), ("a", "NT", "3VT")])


# --- report ----------------------------------------------------------------


def test_report_perfect():
    rows = [(lbl, lbl) for lbl in CLASS_LABELS for _ in range(2)]
    rep = report(confusion(preds_from(rows)))
    assert rep.accuracy == 100.0
    assert rep.macro_f1 == 100.0
    assert all(v == 100.0 for v in rep.per_class_recall.values())


def test_report_one_class_lost():
    rows = [(lbl, lbl) for lbl in CLASS_LABELS if lbl != "3VT" for _ in range(4)]
    rows += [("3VT", "NT")] * 4  # 3VT entirely misclassified
    rep = report(confusion(preds_from(rows)))
    assert rep.per_class_f1["3VT"] == 0.0
    # NT picks up false positives, so only the four untouched classes stay at 100.
    assert rep.macro_f1 < 500 / 6 + 1e-9
    assert rep.per_class_recall["3VT"] == 0.0


def test_report_macro_f1_forced_value():
    # One class absent from truth AND predictions: its F1 is 0 by the
    # 0-when-P+R=0 rule, the other five stay perfect -> macro = 500/6.
    rows = [(lbl, lbl) for lbl in CLASS_LABELS if lbl != "3VT" for _ in range(4)]
    rep = report(confusion(preds_from(rows)))
    assert rep.macro_f1 == pytest.approx(500 / 6, abs=1e-9)
    assert rep.accuracy == 100.0


def test_report_matches_formula_oracle():
    rng = np.random.default_rng(2)
    counts = rng.integers(0, 30, (6, 6)).astype(np.int64)
    cm = ConfusionMatrix(counts=counts)
    rep = report(cm)
    total = counts.sum()
    assert rep.accuracy == pytest.approx(100 * np.trace(counts) / total)
    f1s = []
    for i, lbl in enumerate(CLASS_LABELS):
        row, col = counts[i].sum(), counts[:, i].sum()
        r = counts[i, i] / row if row else 0.0
        p = counts[i, i] / col if col else 0.0
        f1 = 2 * p * r / (p + r) if (p + r) else 0.0
        f1s.append(f1)
        assert rep.per_class_recall[lbl] == pytest.approx(100 * r)
        assert rep.per_class_precision[lbl] == pytest.approx(100 * p)
    assert rep.macro_f1 == pytest.approx(100 * np.mean(f1s))


def test_macro_f1_permutation_invariant():
    rng = np.random.default_rng(3)
    counts = rng.integers(0, 25, (6, 6)).astype(np.int64)
    base = report(ConfusionMatrix(counts=counts)).macro_f1
    perm = rng.permutation(6)
    permuted = counts[np.ix_(perm, perm)]
    assert report(ConfusionMatrix(counts=permuted)).macro_f1 == pytest.approx(base)


def test_prediction_csv_roundtrip(tmp_path):
    ps = preds_from([("3VT", "3VT"), ("NT", "A4C")])
    path = tmp_path / "preds.csv"
    ps.to_csv(path)
    again = PredictionSet.from_csv(path)
    assert again.rows == ps.rows


# --- student t kernel --------------------------------------------------------


def test_t_cdf_symmetry_at_zero():
    for df in (1, 2, 4, 30):
        assert student_t_cdf(0.0, df) == 0.5


def test_t_cdf_cauchy_closed_form():
    assert student_t_cdf(1.0, 1) == pytest.approx(0.75, abs=1e-10)


def test_t_cdf_critical_value():
    assert student_t_cdf(2.776, 4) == pytest.approx(0.975, abs=1e-4)


def test_t_cdf_against_scipy_grid():
    for df in (1, 2, 3, 4, 10, 50):
        for t in (-8.0, -2.5, -0.3, 0.2, 1.0, 3.7, 25.0):
            assert student_t_cdf(t, df) == pytest.approx(
                float(stats.t.cdf(t, df)), abs=1e-8
            )


def test_t_cdf_against_quadrature():
    def pdf(x, df):
        c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
        return c * (1 + x * x / df) ** (-(df + 1) / 2)

    for df, t in ((2, 1.4), (4, 2.776), (7, -0.9)):
        tail, _ = integrate.quad(pdf, -np.inf, t, args=(df,))
        assert student_t_cdf(t, df) == pytest.approx(tail, abs=1e-6)


def test_betainc_bounds():
    assert betainc(2.0, 0.5, 0.0) == 0.0
    assert betainc(2.0, 0.5, 1.0) == 1.0
    assert betainc(0.5, 0.5, 0.5) == pytest.approx(0.5, abs=1e-12)


# --- t-tests against published values ----------------------------------------


TWO_SAMPLE_CASES = [
    ((95.63, 0.20, 3), (95.11, 0.08, 3), 0.0139),  # accuracy, echo test set
    ((86.89, 0.60, 3), (85.33, 0.24, 3), 0.0139),  # F-score, echo test set
    ((90.59, 0.21, 3), (91.53, 0.04, 3), 0.0016),  # accuracy, screening subset
    ((72.43, 0.62, 3), (74.60, 0.11, 3), 0.0039),  # F-score, screening subset
]


@pytest.mark.parametrize("a,b,expected", TWO_SAMPLE_CASES)
def test_two_sample_published_values(a, b, expected):
    p = t_test_two_sample(SummaryStat(*a), SummaryStat(*b))
    assert p == pytest.approx(expected, abs=5e-4)


ONE_SAMPLE_CASES = [
    ((97.33, 0.87, 3), 97.80, 0.45, 0.01),
    ((93.58, 0.33, 3), 93.09, 0.12, 0.01),
    ((94.37, 0.28, 3), 97.80, 0.002, 5e-4),
    ((91.47, 0.27, 3), 93.09, 0.009, 5e-4),
]


@pytest.mark.parametrize("a,mu,expected,tol", ONE_SAMPLE_CASES)
def test_one_sample_published_values(a, mu, expected, tol):
    assert t_test_one_sample(SummaryStat(*a), mu) == pytest.approx(expected, abs=tol)


def test_identical_stats_give_p_one():
    s = SummaryStat(50.0, 1.0, 3)
    assert t_test_two_sample(s, s) == pytest.approx(1.0)
    assert t_test_one_sample(s, 50.0) == pytest.approx(1.0)


def test_zero_variance_degenerate_cases():
    a = SummaryStat(10.0, 0.0, 3)
    assert t_test_two_sample(a, SummaryStat(10.0, 0.0, 3)) == 1.0
    assert t_test_two_sample(a, SummaryStat(11.0, 0.0, 3)) == 0.0
    assert t_test_one_sample(a, 10.0) == 1.0
    assert t_test_one_sample(a, 12.0) == 0.0


def test_two_sample_symmetry():
    a = SummaryStat(95.63, 0.20, 3)
    b = SummaryStat(95.11, 0.08, 3)
    assert abs(t_test_two_sample(a, b) - t_test_two_sample(b, a)) < 1e-12


def test_p_monotone_in_mean_difference():
    b = SummaryStat(50.0, 1.0, 3)
    ps = [
        t_test_two_sample(SummaryStat(50.0 + d, 1.0, 3), b)
        for d in np.linspace(0.0, 6.0, 25)
    ]
    assert all(p1 >= p2 - 1e-12 for p1, p2 in zip(ps, ps[1:]))


def test_summary_stat_from_values():
    s = SummaryStat.from_values([1.0, 2.0, 3.0])
    assert s.mean == 2.0
    assert s.sd == pytest.approx(1.0)
    assert s.n == 3
