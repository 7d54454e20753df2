"""Confusion counts, derived metrics, and reporting rounding."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from landslide_watch.evaluation.metrics import (
    NEGATIVE_LABEL,
    POSITIVE_LABEL,
    ConfusionMatrix,
    Metrics,
    metrics_from_confusion,
    round_half_up,
)

counts = st.integers(min_value=0, max_value=10_000)
matrices = st.builds(ConfusionMatrix, tp=counts, fp=counts, fn=counts, tn=counts).filter(
    lambda cm: cm.total > 0
)


class TestConfusionMatrix:
    def test_from_labels(self):
        pairs = [
            (POSITIVE_LABEL, POSITIVE_LABEL),
            (POSITIVE_LABEL, NEGATIVE_LABEL),
            (POSITIVE_LABEL, NEGATIVE_LABEL),
            (NEGATIVE_LABEL, POSITIVE_LABEL),
            (NEGATIVE_LABEL, NEGATIVE_LABEL),
        ]
        cm = ConfusionMatrix.from_labels(pairs)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 1, 2, 1)
        assert cm.total == 5

    def test_unknown_labels_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix.from_labels([("maybe", POSITIVE_LABEL)])
        with pytest.raises(ValueError):
            ConfusionMatrix.from_labels([(POSITIVE_LABEL, "maybe")])

    @pytest.mark.parametrize("bad", [{"tp": -1}, {"fp": 1.5}, {"tn": True}])
    def test_counts_validated(self, bad):
        kwargs = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
        kwargs.update(bad)
        with pytest.raises(ValueError):
            ConfusionMatrix(**kwargs)

    @given(st.lists(st.tuples(st.booleans(), st.booleans()), max_size=200))
    def test_from_labels_matches_direct_count(self, bits):
        to_label = {True: POSITIVE_LABEL, False: NEGATIVE_LABEL}
        pairs = [(to_label[t], to_label[p]) for t, p in bits]
        cm = ConfusionMatrix.from_labels(pairs)
        assert cm.tp == sum(1 for t, p in bits if t and p)
        assert cm.fp == sum(1 for t, p in bits if not t and p)
        assert cm.fn == sum(1 for t, p in bits if t and not p)
        assert cm.tn == sum(1 for t, p in bits if not t and not p)


class TestMetrics:
    def test_known_values(self):
        # 8215-item example: tp=340, fp=68, fn=96, tn=7711
        cm = ConfusionMatrix(tp=340, fp=68, fn=96, tn=7711)
        m = metrics_from_confusion(cm)
        assert m.accuracy == pytest.approx((340 + 7711) / 8215, abs=0)
        assert m.precision == pytest.approx(340 / 408, abs=0)
        assert m.recall == pytest.approx(340 / 436, abs=0)
        assert m.f1 == pytest.approx(680 / (680 + 68 + 96), abs=0)

    def test_perfect_classifier(self):
        m = metrics_from_confusion(ConfusionMatrix(tp=5, fp=0, fn=0, tn=5))
        assert m == Metrics(1.0, 1.0, 1.0, 1.0)

    def test_zero_denominators_are_zero(self):
        m = metrics_from_confusion(ConfusionMatrix(tp=0, fp=0, fn=0, tn=4))
        assert m.precision == 0.0
        assert m.recall == 0.0
        assert m.f1 == 0.0
        assert m.accuracy == 1.0

    def test_all_wrong(self):
        m = metrics_from_confusion(ConfusionMatrix(tp=0, fp=3, fn=2, tn=0))
        assert m == Metrics(0.0, 0.0, 0.0, 0.0)

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            metrics_from_confusion(ConfusionMatrix(tp=0, fp=0, fn=0, tn=0))

    @given(matrices)
    def test_matches_fraction_oracle(self, cm):
        m = metrics_from_confusion(cm)
        assert m.accuracy == pytest.approx(
            float(Fraction(cm.tp + cm.tn, cm.total)), rel=1e-15
        )
        if cm.tp + cm.fp:
            assert m.precision == pytest.approx(
                float(Fraction(cm.tp, cm.tp + cm.fp)), rel=1e-15
            )
        if cm.tp + cm.fn:
            assert m.recall == pytest.approx(
                float(Fraction(cm.tp, cm.tp + cm.fn)), rel=1e-15
            )

    @given(matrices)
    def test_ranges_and_f1_mean_inequality(self, cm):
        m = metrics_from_confusion(cm)
        for value in m:
            assert 0.0 <= value <= 1.0
        # F1 is the harmonic mean, so it lies between precision and recall.
        if m.precision > 0 and m.recall > 0:
            assert min(m.precision, m.recall) - 1e-12 <= m.f1
            assert m.f1 <= max(m.precision, m.recall) + 1e-12

    @given(matrices)
    def test_f1_consistent_with_precision_recall(self, cm):
        m = metrics_from_confusion(cm)
        if m.precision + m.recall > 0:
            harmonic = 2 * m.precision * m.recall / (m.precision + m.recall)
            assert m.f1 == pytest.approx(harmonic, rel=1e-12)
        else:
            assert m.f1 == 0.0

    @given(matrices, st.integers(min_value=2, max_value=7))
    def test_scale_invariance(self, cm, k):
        scaled = ConfusionMatrix(tp=cm.tp * k, fp=cm.fp * k, fn=cm.fn * k, tn=cm.tn * k)
        a, b = metrics_from_confusion(cm), metrics_from_confusion(scaled)
        for x, y in zip(a, b):
            assert x == pytest.approx(y, rel=1e-12)


class TestRounding:
    @pytest.mark.parametrize(
        "value,places,expected",
        [
            (0.1225, 3, 0.123),  # binary repr is below the half; decimal text is not
            (0.1235, 3, 0.124),
            (0.1234, 3, 0.123),
            (0.5, 0, 1.0),
            (1.5, 0, 2.0),
            (2.5, 0, 3.0),  # half-up, not banker's
            (0.0005, 3, 0.001),
            (0.9995, 3, 1.0),
            (0.805, 3, 0.805),
            (-0.1235, 3, -0.124),
        ],
    )
    def test_half_up_cases(self, value, places, expected):
        assert round_half_up(value, places) == expected

    @given(st.floats(min_value=0, max_value=1, allow_nan=False))
    def test_within_half_quantum(self, value):
        rounded = round_half_up(value, 3)
        assert abs(rounded - value) <= 0.0005 + 1e-12

    @given(st.floats(min_value=0, max_value=1, allow_nan=False))
    def test_idempotent(self, value):
        once = round_half_up(value, 3)
        assert round_half_up(once, 3) == once
