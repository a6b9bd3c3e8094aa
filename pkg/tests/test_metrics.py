import numpy as np
import pytest

from tlstm_lab.metrics import (
    ConfusionCounts,
    confusion,
    ppv_npv_f,
    report_to_csv,
    report_to_markdown,
)
from tlstm_lab.rng import substream


def _brute_force_counts(probs, targets, threshold):
    """Independent per-element recount with plain loops."""
    n, labels = probs.shape
    tp = [0] * labels
    fp = [0] * labels
    tn = [0] * labels
    fn = [0] * labels
    for i in range(n):
        for k in range(labels):
            pred = probs[i][k] >= threshold
            pos = targets[i][k] == 1
            if pred and pos:
                tp[k] += 1
            elif pred and not pos:
                fp[k] += 1
            elif not pred and pos:
                fn[k] += 1
            else:
                tn[k] += 1
    return tp, fp, tn, fn


def test_exact_predictions_have_no_errors():
    targets = substream(0, "m").integers(0, 2, (50, 5))
    counts = confusion(targets.astype(float), targets, 0.5)
    assert not counts.fp.any() and not counts.fn.any()


def test_all_negative_predictions_all_positive_targets():
    n = 40
    counts = confusion(np.zeros((n, 3)), np.ones((n, 3)), 0.5)
    assert not counts.tp.any()
    assert np.all(counts.fn == n)


def test_threshold_is_inclusive():
    counts = confusion(np.array([[0.5]]), np.array([[1]]), 0.5)
    assert counts.tp[0] == 1 and counts.fn[0] == 0


@pytest.mark.parametrize("seed", range(5))
def test_confusion_matches_brute_force_recount(seed):
    rng = substream(seed, "metrics")
    probs = rng.uniform(0, 1, (200, 5))
    targets = rng.integers(0, 2, (200, 5))
    counts = confusion(probs, targets, 0.5)
    tp, fp, tn, fn = _brute_force_counts(probs, targets, 0.5)
    assert counts.tp.tolist() == tp
    assert counts.fp.tolist() == fp
    assert counts.tn.tolist() == tn
    assert counts.fn.tolist() == fn


def test_reordering_samples_leaves_metrics_unchanged():
    rng = substream(9, "metrics")
    probs = rng.uniform(0, 1, (100, 4))
    targets = rng.integers(0, 2, (100, 4))
    perm = rng.permutation(100)
    a = ppv_npv_f(confusion(probs, targets, 0.5))
    b = ppv_npv_f(confusion(probs[perm], targets[perm], 0.5))
    assert np.array_equal(a.ppv, b.ppv, equal_nan=True)
    assert np.array_equal(a.f_measure, b.f_measure, equal_nan=True)


def _counts(tp, fp, tn, fn):
    return ConfusionCounts(
        tp=np.array([tp]), fp=np.array([fp]), tn=np.array([tn]), fn=np.array([fn])
    )


def test_ppv_formula():
    rep = ppv_npv_f(_counts(3, 1, 4, 2))
    assert rep.ppv[0] == 0.75


def test_zero_denominator_marked_undefined():
    rep = ppv_npv_f(_counts(0, 0, 6, 4))
    assert np.isnan(rep.ppv[0])
    assert not np.isnan(rep.npv[0])
    mean, skipped = rep.macro["PPV"]
    assert skipped == 1 and np.isnan(mean)


def test_f_equals_ppv_and_recall_when_equal():
    # tp=9, fp=1, fn=1 -> ppv = recall = 0.9 -> F = 0.9
    rep = ppv_npv_f(_counts(9, 1, 5, 1))
    assert rep.ppv[0] == rep.recall[0] == 0.9
    assert abs(rep.f_measure[0] - 0.9) < 1e-15


@pytest.mark.parametrize("seed", range(4))
def test_f_bounded_by_arithmetic_mean(seed):
    rng = substream(seed, "fbound")
    tp, fp, tn, fn = (int(v) for v in rng.integers(1, 50, 4))
    rep = ppv_npv_f(_counts(tp, fp, tn, fn))
    arith = (rep.ppv[0] + rep.recall[0]) / 2
    assert rep.f_measure[0] <= arith + 1e-12


def test_ratios_match_direct_formulas_within_tolerance():
    rng = substream(17, "ratios")
    for _ in range(25):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 60, 4))
        rep = ppv_npv_f(_counts(tp, fp, tn, fn))
        if tp + fp:
            assert abs(rep.ppv[0] - tp / (tp + fp)) < 1e-12
        if tn + fn:
            assert abs(rep.npv[0] - tn / (tn + fn)) < 1e-12
        if tp + fn:
            assert abs(rep.recall[0] - tp / (tp + fn)) < 1e-12


def test_counts_invariant_totals_must_agree():
    with pytest.raises(ValueError, match="totals"):
        ConfusionCounts(
            tp=np.array([1, 5]),
            fp=np.array([1, 1]),
            tn=np.array([1, 1]),
            fn=np.array([1, 1]),
        )


def test_shape_and_threshold_validation():
    with pytest.raises(ValueError, match="equal 2-D"):
        confusion(np.zeros((3, 2)), np.zeros((2, 2)), 0.5)
    with pytest.raises(ValueError, match="threshold"):
        confusion(np.zeros((2, 2)), np.zeros((2, 2)), 1.5)


def test_report_formats():
    rng = substream(21, "fmt")
    probs = rng.uniform(0, 1, (60, 5))
    targets = rng.integers(0, 2, (60, 5))
    rep = ppv_npv_f(confusion(probs, targets, 0.5))
    labels = ["0", "3", "6", "8", "9"]
    md = report_to_markdown(rep, labels, "demo")
    lines = md.splitlines()
    assert lines[0].count("|") == 8  # 7 cells: title + 5 labels + avg
    assert sum(l.startswith("| PPV") for l in lines) == 1
    assert sum(l.startswith("| NPV") for l in lines) == 1
    assert sum(l.startswith("| F-measure") for l in lines) == 1
    csv_text = report_to_csv(rep, labels, config_hash="cafe")
    assert csv_text.startswith("# config_hash=cafe")
    assert "macro_avg" in csv_text
    header = csv_text.splitlines()[1].split(",")
    assert header == ["label", "tp", "fp", "tn", "fn", "ppv", "npv", "recall", "f_measure"]
