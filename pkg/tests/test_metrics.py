import pytest

from oracles import span_set
from ortagger.harness.metrics import evaluate_accuracy, evaluate_span_f1, evaluate_tags, extract_spans

GOLD = [["B-PER", "I-PER", "O", "B-LOC", "O"]]


def test_identical_predictions():
    r = evaluate_span_f1(GOLD, GOLD)
    assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)


def test_one_hit_one_spurious():
    pred = [["B-PER", "I-PER", "O", "O", "B-ORG"]]
    r = evaluate_span_f1(pred, GOLD)
    assert (r.precision, r.recall, r.f1) == (0.5, 0.5, 0.5)


def test_all_outside_prediction():
    r = evaluate_span_f1([["O"] * 5], GOLD)
    assert r.recall == 0.0 and r.f1 == 0.0 and r.precision == 0.0


def test_boundary_and_type_must_match():
    r = evaluate_span_f1([["B-PER", "O", "O", "B-ORG", "O"]], GOLD)
    assert r.f1 == 0.0
    assert r.per_label["PER"].support == 1 and r.per_label["ORG"].support == 0


def test_extract_spans_agrees_with_reference_reader():
    cases = [
        ["B-A", "I-A", "I-B", "B-B", "O", "I-A", "B-A"],
        ["I-X", "I-X", "B-X"],
        ["B-A", "B-A", "I-A"],
        ["O", "O"],
    ]
    for labels in cases:
        assert extract_spans(labels) == span_set(labels)
    assert extract_spans(["O", "I-X", "I-X"]) == set()  # orphan continuation is not a span


def test_accuracy_examples():
    assert evaluate_accuracy([["A", "B"]], [["A", "B"]]) == 1.0
    assert evaluate_accuracy([["A", "X", "B", "Y"]], [["A", "B", "B", "B"]]) == 0.5
    assert evaluate_accuracy([["X", "Y"]], [["A", "B"]]) == 0.0


def test_length_mismatch_raises():
    with pytest.raises(ValueError):
        evaluate_span_f1([["O"]], [["O", "O"]])
    with pytest.raises(ValueError):
        evaluate_accuracy([["O"]], [])


def test_tag_report():
    r = evaluate_tags([["N", "V", "N"]], [["N", "N", "N"]], dataset="pos")
    assert r.accuracy == pytest.approx(2 / 3) and r.f1 == r.accuracy
    assert r.per_label["N"].recall == pytest.approx(2 / 3)
    assert r.dataset == "pos" and r.tokens == 3


def test_report_serializes():
    r = evaluate_span_f1(GOLD, GOLD, dataset="d", seed=3, fingerprint="abc")
    d = r.to_dict()
    assert d["per_label"]["PER"]["f1"] == 1.0 and d["seed"] == 3
    assert set(r.summary_row()) >= {"dataset", "precision", "recall", "f1", "accuracy"}
