"""Fleiss' kappa: algebraic oracles, invariances, CSV loading."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from landslide_watch.evaluation.kappa import (
    AnnotationMatrix,
    fleiss_kappa,
    load_annotation_csv,
)


def fraction_kappa(rows) -> Fraction:
    """Exact rational reimplementation used as the oracle."""
    n = sum(rows[0])
    items = len(rows)
    k = len(rows[0])
    total = Fraction(items * n)
    p_cats = [Fraction(sum(row[j] for row in rows)) / total for j in range(k)]
    p_bar = Fraction(
        sum(Fraction(sum(c * c for c in row) - n, n * (n - 1)) for row in rows), items
    )
    p_e = sum(p * p for p in p_cats)
    if p_e >= 1:
        return Fraction(1)
    return (p_bar - p_e) / (1 - p_e)


def row_strategy(n_raters: int, k: int):
    """Rows of k non-negative ints summing to n_raters."""

    def to_row(cuts):
        points = sorted(cuts)
        bounds = [0] + points + [n_raters]
        return tuple(bounds[i + 1] - bounds[i] for i in range(k))

    return st.lists(
        st.integers(min_value=0, max_value=n_raters), min_size=k - 1, max_size=k - 1
    ).map(to_row)


matrix_strategy = st.integers(min_value=2, max_value=6).flatmap(
    lambda n: st.integers(min_value=2, max_value=5).flatmap(
        lambda k: st.lists(row_strategy(n, k), min_size=1, max_size=12).map(
            AnnotationMatrix.from_rows
        )
    )
)


class TestFleissKappa:
    def test_worked_example(self):
        # Two raters, three items, two categories: P_bar = 2/3, P_e = 13/18,
        # kappa = (2/3 - 13/18) / (1 - 13/18) = -1/5.
        rows = [(2, 0), (2, 0), (1, 1)]
        m = AnnotationMatrix.from_rows(rows)
        assert fleiss_kappa(m) == pytest.approx(-0.2, abs=1e-12)
        assert fraction_kappa(rows) == Fraction(-1, 5)

    def test_perfect_agreement_two_categories(self):
        m = AnnotationMatrix.from_rows([(4, 0), (0, 4), (4, 0)])
        assert fleiss_kappa(m) == 1.0

    def test_single_category_degenerate_case(self):
        m = AnnotationMatrix.from_rows([(4, 0), (4, 0)])
        assert fleiss_kappa(m) == 1.0

    def test_maximal_disagreement_two_raters(self):
        # Every item split 1/1: P_bar = 0.
        m = AnnotationMatrix.from_rows([(1, 1), (1, 1)])
        assert fleiss_kappa(m) == pytest.approx(-1.0, abs=1e-12)

    @given(matrix_strategy)
    def test_matches_fraction_oracle(self, m):
        assert fleiss_kappa(m) == pytest.approx(
            float(fraction_kappa(m.counts)), abs=1e-12
        )

    @given(matrix_strategy)
    def test_never_exceeds_one(self, m):
        assert fleiss_kappa(m) <= 1.0 + 1e-12

    @given(matrix_strategy, st.integers(min_value=2, max_value=4))
    def test_duplicating_all_items_preserves_kappa(self, m, times):
        duplicated = AnnotationMatrix.from_rows(list(m.counts) * times)
        assert fleiss_kappa(duplicated) == pytest.approx(fleiss_kappa(m), abs=1e-9)

    @given(matrix_strategy, st.randoms(use_true_random=False))
    def test_category_permutation_invariant(self, m, rng):
        order = list(range(m.n_categories))
        rng.shuffle(order)
        permuted = AnnotationMatrix.from_rows(
            [tuple(row[j] for j in order) for row in m.counts]
        )
        assert fleiss_kappa(permuted) == pytest.approx(fleiss_kappa(m), abs=1e-9)

    @given(matrix_strategy, st.randoms(use_true_random=False))
    def test_item_order_invariant(self, m, rng):
        rows = list(m.counts)
        rng.shuffle(rows)
        assert fleiss_kappa(AnnotationMatrix.from_rows(rows)) == pytest.approx(
            fleiss_kappa(m), abs=1e-9
        )


class TestAnnotationMatrix:
    def test_from_rows_infers_raters(self):
        m = AnnotationMatrix.from_rows([(2, 1), (0, 3)])
        assert m.n_raters == 3
        assert m.n_items == 2
        assert m.n_categories == 2

    @pytest.mark.parametrize(
        "rows",
        [
            [],
            [(3,)],  # one category
            [(1, 0)],  # one rater
            [(2, 1), (1, 1)],  # inconsistent row sum
            [(2, 1), (3, 0, 0)],  # ragged
            [(2, -1)],
        ],
    )
    def test_invalid_matrices_rejected(self, rows):
        with pytest.raises(ValueError):
            AnnotationMatrix.from_rows(rows)

    def test_bool_counts_rejected(self):
        with pytest.raises(ValueError):
            AnnotationMatrix(counts=((True, 1),), n_raters=2)


class TestCsvLoader:
    def test_plain_matrix(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("2,0\n2,0\n1,1\n", encoding="utf-8")
        m = load_annotation_csv(path)
        assert m.n_items == 3
        assert fleiss_kappa(m) == pytest.approx(-0.2, abs=1e-12)

    def test_header_row_skipped(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("landslide,not_landslide\n3,0\n0,3\n", encoding="utf-8")
        m = load_annotation_csv(path)
        assert m.n_items == 2

    def test_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("3,0\n\n0,3\n", encoding="utf-8")
        assert load_annotation_csv(path).n_items == 2

    def test_non_integer_body_rejected(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("3,0\n2,x\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 2"):
            load_annotation_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValueError):
            load_annotation_csv(path)
