import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzzkb.core import CATEGORICAL, FeatureSpec, LabeledDataset
from fuzzkb.data import (
    DataFormatError,
    DatasetFormat,
    feature_bounds,
    impute_policy,
    load_dataset,
    split_sources,
)

from conftest import HEPATITIS, IRIS, TICTACTOE


def enumerate_tictactoe_endgames():
    """All terminal boards of games where x moves first (the UCI endgame set)."""
    lines = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]

    def wins(b, p):
        return any(all(b[i] == p for i in line) for line in lines)

    found = {}

    def play(b, player):
        if wins(b, "x") or wins(b, "o") or "b" not in b:
            found[tuple(b)] = "positive" if wins(b, "x") else "negative"
            return
        for i in range(9):
            if b[i] == "b":
                b[i] = player
                play(b, "o" if player == "x" else "x")
                b[i] = "b"

    play(["b"] * 9, "x")
    return found


class TestHepatitis:
    def test_counts(self, hepatitis):
        assert len(hepatitis) == 155
        assert Counter(hepatitis.labels.tolist()) == {0: 32, 1: 123}
        assert hepatitis.classes == ("Die", "Live")
        assert [f.name for f in hepatitis.features] == [
            "Bilirubin", "Alk Phosphate", "SGOT", "Albumin", "Protime"]

    def test_sixth_record(self, hepatitis):
        # sixth record of the UCI file (class Live)
        values, label = hepatitis.rows[5]
        assert values == (0.90, 95.0, 28.0, 4.0, 75.0)
        assert hepatitis.classes[label] == "Live"

    def test_missing(self, hepatitis):
        assert np.isnan(hepatitis.values).any()
        assert hepatitis.rows[6][0] == (None, None, None, None, None)

    def test_full_feature_set(self):
        ds = load_dataset("hepatitis", HEPATITIS, {"features": ["Age", "Sex", "Bilirubin"]})
        assert ds.features[1].kind == CATEGORICAL
        assert ds.rows[0][0] == (30.0, 1, 1.0)

    def test_bad_class(self, tmp_path):
        bad = tmp_path / "h.data"
        lines = HEPATITIS.read_text().splitlines()
        lines[2] = "3" + lines[2][1:]
        bad.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataFormatError) as err:
            load_dataset("hepatitis", bad)
        assert err.value.line == 3


class TestIris:
    def test_first_record(self, iris):
        assert len(iris) == 150
        assert iris.rows[0] == ((5.1, 3.5, 1.4, 0.2), 0)
        assert Counter(iris.labels.tolist()) == {0: 50, 1: 50, 2: 50}

    def test_unknown_class(self, tmp_path):
        f = tmp_path / "iris.data"
        f.write_text("5.1,3.5,1.4,0.2,Iris-setosa\n5.0,3.0,1.0,0.1,Iris-nova\n")
        with pytest.raises(DataFormatError) as err:
            load_dataset("iris", f)
        assert err.value.line == 2

    def test_malformed_row(self, tmp_path):
        f = tmp_path / "iris.data"
        f.write_text("5.1,3.5,1.4,0.2,Iris-setosa\n5.1,3.5,abc,0.2,Iris-setosa\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_dataset("iris", f)

    def test_bounds_attached(self, iris):
        f = iris.features[0]
        assert (f.lower, f.upper) == (4.3, 7.9) and f.num_linguistic == 3


class TestTicTacToe:
    def test_first_record(self, tictactoe):
        assert tictactoe.rows[0] == ((0, 0, 0, 0, 1, 1, 0, 1, 1), 0)
        assert tictactoe.classes == ("positive", "negative")

    def test_matches_game_enumeration(self, tictactoe):
        boards = enumerate_tictactoe_endgames()
        assert len(tictactoe) == len(boards) == 958
        squares = ("x", "o", "b")
        for values, label in tictactoe.rows:
            board = tuple(squares[int(v)] for v in values)
            assert boards[board] == tictactoe.classes[label]


class TestGeneric:
    def test_sidecar(self, tmp_path):
        csv = tmp_path / "d.csv"
        csv.write_text("yes,1.5,red\nno,?,blue\nyes,3.0,red\n")
        (tmp_path / "d.csv.schema.json").write_text(json.dumps({
            "features": [{"name": "size", "kind": "numeric"},
                         {"name": "color", "kind": "categorical", "categories": ["red", "blue"]}],
            "class_column": 0}))
        ds = load_dataset("generic", csv)
        assert ds.classes == ("yes", "no")
        assert ds.rows == [((1.5, 0), 0), ((None, 1), 1), ((3.0, 0), 0)]

    def test_missing_sidecar(self, tmp_path):
        csv = tmp_path / "d.csv"
        csv.write_text("1,a\n")
        with pytest.raises(DataFormatError):
            load_dataset("generic", csv)

    def test_format_names(self):
        assert DatasetFormat.parse("generic_csv") is DatasetFormat.GENERIC
        with pytest.raises(DataFormatError):
            DatasetFormat.parse("sugarcane")


def one_feature(values):
    f = FeatureSpec("v", lower=-1e9, upper=1e9)
    return LabeledDataset.from_rows([f], ["a"], [((v,), 0) for v in values])


class TestBounds:
    def test_exact(self):
        assert feature_bounds(one_feature([0.0, 10.0]), 0.0) == {"v": (0.0, 10.0)}

    def test_margin(self):
        assert feature_bounds(one_feature([0.0, 10.0]), 0.1) == {"v": (-1.0, 11.0)}

    def test_degenerate(self):
        assert feature_bounds(one_feature([5.0, 5.0]), 0.0) == {"v": (4.75, 5.25)}

    def test_no_values(self):
        with pytest.raises(ValueError):
            feature_bounds(one_feature([None, None]))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.floats(0, 2))
    def test_nonempty_range(self, values, margin):
        lo, hi = feature_bounds(one_feature(values), margin)["v"]
        assert lo < hi


class TestImpute:
    def test_keep(self, hepatitis):
        assert impute_policy(hepatitis, "keep_missing") is hepatitis

    def test_mean(self):
        ds = impute_policy(one_feature([2.0, None, 4.0]), "mean_impute")
        assert ds.values[:, 0].tolist() == [2.0, 3.0, 4.0]

    def test_mode(self):
        f = FeatureSpec("c", CATEGORICAL, categories=["x", "o"])
        ds = LabeledDataset.from_rows([f], ["a"], [((0,), 0), ((0,), 0), ((None,), 0)])
        assert impute_policy(ds, "mean_impute").values[:, 0].tolist() == [0, 0, 0]

    def test_no_missing_left(self, hepatitis):
        assert not np.isnan(impute_policy(hepatitis, "mean_impute").values).any()


class TestSplit:
    def test_single(self, iris):
        (share,) = split_sources(iris, 1, seed=0)
        assert sorted(map(tuple, share.values.tolist())) == sorted(map(tuple, iris.values.tolist()))

    def test_even_sizes(self):
        ds = one_feature(list(map(float, range(10))))
        assert [len(s) for s in split_sources(ds, 2, seed=0)] == [5, 5]

    def test_deterministic(self, iris):
        a, b = split_sources(iris, 3, seed=4), split_sources(iris, 3, seed=4)
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))

    def test_too_many(self):
        with pytest.raises(ValueError):
            split_sources(one_feature([1.0, 2.0]), 3, seed=0)

    @pytest.mark.parametrize("P", [1, 2, 3, 7])
    def test_disjoint_exhaustive_stratified(self, hepatitis, P):
        shares = split_sources(hepatitis, P, seed=P)
        rows = [tuple(np.nan_to_num(v, nan=-1.0)) + (c,) for s in shares
                for v, c in zip(s.values, s.labels)]
        full = [tuple(np.nan_to_num(v, nan=-1.0)) + (c,) for v, c in zip(hepatitis.values,
                                                                        hepatitis.labels)]
        assert Counter(rows) == Counter(full)
        for c in range(2):
            counts = [int(np.sum(s.labels == c)) for s in shares]
            assert max(counts) - min(counts) <= 1
