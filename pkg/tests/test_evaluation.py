from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm

from bhmc.evaluation import ari, contingency, f_measure, level_labels, level_report, nmi, purity
from oracles import ari_exact, f_measure_exact, purity_exact

labelings = st.integers(2, 30).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n)))


def test_level_labels():
    paths = [[0, 1, 3], [0, 2, 5], [0, 1]]
    assert level_labels(paths, 1, 5) == [0, 0, 0]
    assert level_labels(paths, 2, 5) == [1, 2, 1]
    assert level_labels(paths, 3, 5) == [3, 5, 1]
    assert level_labels(paths, 5, 5) == [3, 5, 1]  # short path keeps its last label
    with pytest.raises(ValueError):
        level_labels(paths, 0, 5)
    with pytest.raises(ValueError):
        level_labels([[]], 1, 1)


def test_contingency_table():
    t = contingency([0, 0, 1, 1], [0, 1, 1, 1])
    assert t.tolist() == [[1, 1], [0, 2]]
    with pytest.raises(ValueError):
        contingency([0], [0, 1])


def test_purity_fixtures():
    assert purity([5, 5, 9, 9], [0, 0, 1, 1]) == 1.0
    assert purity([0, 0, 0, 0], [0, 0, 1, 1]) == 0.5
    assert purity([0, 0, 1, 1], [0, 1, 1, 1]) == 0.75
    assert Fraction(purity([0, 0, 1, 1], [0, 1, 1, 1])) == purity_exact([0, 0, 1, 1], [0, 1, 1, 1])


def test_nmi_fixtures():
    assert nmi([1, 1, 0, 0, 2], [0, 0, 1, 1, 2]) == pytest.approx(1.0, abs=1e-12)
    assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0
    assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0


def test_ari_fixtures():
    assert ari([3, 3, 4, 4], [0, 0, 1, 1]) == 1.0
    assert ari([0, 0, 1, 1], [0, 1, 0, 1]) == -0.5
    assert Fraction(ari([0, 0, 1, 1], [0, 1, 0, 1])) == ari_exact([0, 0, 1, 1], [0, 1, 0, 1])
    with pytest.raises(ValueError):
        ari([0], [0])


def test_ari_random_labelings_centre_on_zero():
    rng = np.random.default_rng(0)
    truth = np.repeat([0, 1, 2, 3], 25)
    vals = [ari(rng.permutation(truth), truth) for _ in range(10_000)]
    assert abs(np.mean(vals)) <= 0.02


def test_f_measure_fixtures():
    assert f_measure([1, 1, 0, 0], [0, 0, 1, 1]) == 1.0
    assert f_measure([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(2 / 3, abs=1e-15)
    assert Fraction(f_measure([0, 0, 0, 0], [0, 0, 1, 1])).limit_denominator(1000) == Fraction(2, 3)


@settings(max_examples=200, deadline=None)
@given(labelings)
def test_metrics_against_exact_and_reference(pair):
    pred, truth = pair
    assert purity(pred, truth) == pytest.approx(float(purity_exact(pred, truth)), abs=1e-12)
    assert f_measure(pred, truth) == pytest.approx(float(f_measure_exact(pred, truth)), abs=1e-12)
    if len(set(pred)) > 1 or len(set(truth)) > 1:
        assert ari(pred, truth) == pytest.approx(float(ari_exact(pred, truth)), abs=1e-12)
        assert ari(pred, truth) == pytest.approx(skm.adjusted_rand_score(truth, pred), abs=1e-12)
    if len(set(pred)) > 1 and len(set(truth)) > 1:
        ref = skm.normalized_mutual_info_score(truth, pred, average_method="geometric")
        assert nmi(pred, truth) == pytest.approx(ref, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(labelings, st.permutations(range(5)), st.permutations(range(5)))
def test_metrics_invariances(pair, perm_a, perm_b):
    pred, truth = pair
    rp = [perm_a[v] for v in pred]
    rt = [perm_b[v] for v in truth]
    for metric in (purity, nmi, ari, f_measure):
        assert metric(rp, rt) == pytest.approx(metric(pred, truth), abs=1e-12)
    assert nmi(pred, truth) == pytest.approx(nmi(truth, pred), abs=1e-12)
    assert ari(pred, truth) == pytest.approx(ari(truth, pred), abs=1e-12)
    assert purity(pred, truth) >= 1 / len(set(truth)) - 1e-12
    for v in (purity(pred, truth), nmi(pred, truth), f_measure(pred, truth)):
        assert 0.0 <= v <= 1.0
    assert -1.0 <= ari(pred, truth) <= 1.0


def test_level_report_identity_and_single_level():
    paths = [[0, 1, 3], [0, 1, 4], [0, 2, 5], [0, 2, 5]]
    rep = level_report(paths, paths, 3)
    for row in rep.rows()[1:]:
        assert row["purity"] == row["nmi"] == row["ari"] == row["f_measure"] == 1.0
    one = level_report(paths, paths, 1)
    assert one.rows() == [dict(level=1, purity=1.0, nmi=1.0, ari=1.0, f_measure=1.0)]


def test_level_report_four_point_fixture():
    # level 2 labels: pred [a, a, b, b] vs truth [x, y, x, y]
    pred = [[0, 1], [0, 1], [0, 2], [0, 2]]
    truth = [[9, 7], [9, 8], [9, 7], [9, 8]]
    row = level_report(pred, truth, 2).rows()[1]
    assert row == dict(level=2, purity=0.5, nmi=0.0, ari=-0.5, f_measure=0.5)


def test_level_report_length_mismatch():
    with pytest.raises(ValueError):
        level_report([[0, 1]], [[0, 1], [0, 2]], 2)
