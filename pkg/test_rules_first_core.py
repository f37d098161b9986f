"""
Tests for the core rules-first types, losses, prediction and file formats.
"""

import json
import math

import numpy as np
import pytest

from rules_first_core import (
    ConfigError,
    DataError,
    Dataset,
    Example,
    LinearModel,
    NormRegime,
    Rule,
    RuleSet,
    RulesFirstModel,
    accuracy,
    decision_scores,
    empirical_loss,
    error_rate,
    get_loss,
    load_model,
    loss_hinge,
    loss_margin,
    loss_mis,
    loss_ramp,
    model_from_dict,
    model_to_dict,
    predict,
    predict_batch,
    read_dataset,
    save_model,
    sign,
    write_dataset,
)


def linear(weights, bias=0.0, regime=None):
    return LinearModel(weights=np.array(weights, dtype=float), bias=bias,
                       norm_regime=regime or NormRegime.l2_penalty(1.0))


# ============================================================================
# Losses
# ============================================================================

@pytest.mark.parametrize('score, label, expected', [(2.0, 1, 0.0), (0.0, 1, 1.0), (-0.5, -1, 0.0)])
def test_loss_mis(score, label, expected):
    assert loss_mis(score, label) == expected


@pytest.mark.parametrize('score, label, expected', [(0.3, 1, 0.7), (-1.0, 1, 2.0), (5.0, 1, 0.0)])
def test_loss_hinge(score, label, expected):
    assert loss_hinge(score, label) == pytest.approx(expected)


@pytest.mark.parametrize('score, label, expected', [(-3.0, 1, 1.0), (0.5, 1, 0.5), (1.0, 1, 0.0)])
def test_loss_ramp(score, label, expected):
    assert loss_ramp(score, label) == pytest.approx(expected)


@pytest.mark.parametrize('score, label, expected', [(1.0, 1, 0.0), (0.99, 1, 1.0), (-2.0, -1, 0.0)])
def test_loss_margin(score, label, expected):
    assert loss_margin(score, label) == expected


def test_loss_ordering_over_random_pairs():
    rng = np.random.default_rng(0)
    scores = rng.normal(0.0, 2.0, size=10000)
    labels = rng.choice([-1, 1], size=10000)
    mis, ramp = loss_mis(scores, labels), loss_ramp(scores, labels)
    hinge, margin = loss_hinge(scores, labels), loss_margin(scores, labels)
    assert np.all(mis <= ramp)
    assert np.all(ramp <= hinge)
    assert np.all(ramp <= margin)


def test_losses_handle_infinite_scores():
    assert loss_hinge(np.inf, 1) == 0.0
    assert loss_ramp(-np.inf, 1) == 1.0
    assert loss_mis(np.inf, -1) == 1.0


def test_get_loss_rejects_unknown_name():
    with pytest.raises(ConfigError, match='Valid losses'):
        get_loss('squared')


def test_sign_maps_zero_to_negative():
    assert list(sign([2.0, 0.0, -1.0])) == [1, -1, -1]


# ============================================================================
# Types
# ============================================================================

def test_example_drops_zeros_and_rejects_bad_labels():
    example = Example({2: 1.0, 0: 0.0}, 1)
    assert example.features == {2: 1.0}
    with pytest.raises(DataError):
        Example({0: 1.0}, 0)
    with pytest.raises(DataError):
        Example({0: math.nan}, 1)


def test_dataset_validates_labels_and_dimension():
    with pytest.raises(DataError):
        Dataset.from_dense([[1.0]], [2])
    with pytest.raises(DataError):
        Dataset(np.ones((2, 3)), [1, -1], dimension=2)
    data = Dataset(np.ones((2, 2)), [1, -1], dimension=5)
    assert data.dimension == 5
    assert data.features.shape == (2, 5)


def test_dataset_from_examples_roundtrips_examples():
    examples = [Example({0: 1.0, 3: 2.5}, 1), Example({}, -1)]
    data = Dataset.from_examples(examples, 4)
    assert data.examples == examples
    with pytest.raises(DataError):
        Dataset.from_examples([Example({4: 1.0}, 1)], 4)


def test_dataset_transformations():
    data = Dataset.from_dense([[1, 0], [0, 1], [1, 1], [0, 0]], [1, -1, 1, -1])
    assert len(data.subset([0, 2])) == 2
    assert len(data.subset(data.labels == 1)) == 2
    zeroed = data.with_zeroed_columns([0])
    assert zeroed.features[:, 0].nnz == 0
    assert zeroed.dimension == 2
    assert len(data.concat(data)) == 8

    first, rest = data.split(0.5, seed=3)
    assert len(first) + len(rest) == 4
    again, _ = data.split(0.5, seed=3)
    assert np.array_equal(first.features.toarray(), again.features.toarray())
    with pytest.raises(ConfigError):
        data.split(1.0, seed=0)


def test_dataset_fires_and_binary_flag():
    data = Dataset.from_dense([[1, 0], [-1, 2], [1, 1]], [1, -1, 1])
    assert list(data.fires(0)) == [True, False, True]
    assert not data.is_binary()
    assert Dataset.from_dense([[1, 0], [0, 1]], [1, -1]).is_binary()


def test_empty_dataset_loss_raises():
    with pytest.raises(DataError, match='empty dataset'):
        empirical_loss(linear([1.0]), Dataset.empty(1))


def test_rule_set_rejects_duplicates_and_bad_labels():
    with pytest.raises(ConfigError):
        RuleSet((Rule(1, 1), Rule(1, -1)))
    with pytest.raises(ConfigError):
        RuleSet((Rule(1, 0),))


def test_ball_regime_is_enforced_on_linear_models():
    with pytest.raises(ConfigError):
        linear([3.0, 4.0], regime=NormRegime.l2_ball(1.0))
    model = linear([0.6, 0.8], regime=NormRegime.l2_ball(1.0))
    assert model.norm_regime.norm(model.weights) == pytest.approx(1.0)


def test_rules_outside_dimension_are_rejected():
    with pytest.raises(ConfigError):
        RulesFirstModel(RuleSet((Rule(5, 1),)), linear([0.0, 0.0]))


# ============================================================================
# Prediction
# ============================================================================

def six_feature_model(rules):
    weights = np.zeros(6)
    weights[0] = -0.2
    return RulesFirstModel(RuleSet(tuple(rules)), linear(weights))


def test_predict_rule_fires():
    assert predict(six_feature_model([Rule(3, 1)]), {3: 1.0}) == (1, 3)


def test_predict_falls_back_to_linear():
    assert predict(six_feature_model([Rule(3, 1)]), {0: 1.0}) == (-1, None)


def test_predict_second_rule_fires():
    model = six_feature_model([Rule(3, 1), Rule(5, -1)])
    assert predict(model, {5: 2.0}) == (-1, 5)


def test_predict_negative_value_does_not_fire():
    model = six_feature_model([Rule(3, 1)])
    assert predict(model, {3: -1.0, 0: 1.0}) == (-1, None)


def test_predict_rejects_out_of_range_index():
    with pytest.raises(DataError):
        predict(six_feature_model([]), {6: 1.0})


def test_predict_rejects_negative_index():
    with pytest.raises(DataError):
        predict(six_feature_model([Rule(3, 1)]), {-1: 1.0})


def test_predict_batch_matches_predict():
    model = six_feature_model([Rule(3, 1), Rule(5, -1)])
    rng = np.random.default_rng(1)
    data = Dataset.from_dense(rng.integers(-1, 2, size=(30, 6)), rng.choice([-1, 1], size=30))
    labels, attribution = predict_batch(model, data)
    for i, example in enumerate(data):
        label, rule = predict(model, example)
        assert label == labels[i]
        assert (rule if rule is not None else -1) == attribution[i]


def test_empirical_loss_examples():
    data = Dataset.from_dense([[1, 0], [-1, 0]], [1, 1])
    assert empirical_loss(linear([1.0, 0.0]), data, 'mis') == 0.5

    separated = Dataset.from_dense([[2, 0]], [1])
    assert empirical_loss(linear([1.0, 0.0]), separated, 'ramp') == 0.0

    model = RulesFirstModel(RuleSet((Rule(0, 1),)), linear([0.0, 0.0]))
    assert empirical_loss(model, Dataset.from_dense([[1, 0]], [-1]), 'mis') == 1.0


def test_rule_fired_scores_are_infinite():
    model = RulesFirstModel(RuleSet((Rule(0, -1),)), linear([0.0, 1.0]))
    data = Dataset.from_dense([[1, 0], [0, 2]], [-1, 1])
    scores = decision_scores(model, data)
    assert scores[0] == -np.inf
    assert scores[1] == 2.0
    assert empirical_loss(model, data, 'hinge') == 0.0


def test_error_rate_uses_sign_zero_negative():
    data = Dataset.from_dense([[0.0], [0.0]], [1, -1])
    assert error_rate(linear([1.0]), data) == 0.5
    assert accuracy(linear([1.0]), data) == 0.5


def test_margin_scale_changes_scores_not_predictions():
    data = Dataset.from_dense([[1.0], [-2.0]], [1, -1])
    plain = linear([0.5])
    scaled = LinearModel(weights=np.array([0.5]), norm_regime=NormRegime.l2_penalty(1.0), margin_scale=4.0)
    assert np.array_equal(plain.predict_labels(data), scaled.predict_labels(data))
    assert empirical_loss(plain, data, 'margin') == 0.5
    assert empirical_loss(scaled, data, 'margin') == 0.0


# ============================================================================
# Files
# ============================================================================

@pytest.mark.parametrize('name', ['data.txt', 'data.csv'])
def test_dataset_files_roundtrip(tmp_path, name):
    data = Dataset.from_dense([[1, 0, 0.25], [0, 0, 0], [0, -3, 0]], [1, -1, 1])
    path = tmp_path / name
    write_dataset(data, path)
    loaded = read_dataset(path)
    assert loaded.dimension == 3
    assert np.array_equal(loaded.labels, data.labels)
    assert np.array_equal(loaded.features.toarray(), data.features.toarray())


def test_sparse_text_errors_carry_line_numbers(tmp_path):
    path = tmp_path / 'bad.txt'
    path.write_text('+1 0:1\n+1 2:1 1:1\n')
    with pytest.raises(DataError, match='line 2'):
        read_dataset(path)
    path.write_text('0 0:1\n')
    with pytest.raises(DataError, match='line 1'):
        read_dataset(path)


def test_sparse_text_dimension_from_header(tmp_path):
    path = tmp_path / 'wide.txt'
    path.write_text('# dimension=10\n+1 0:1\n-1\n')
    data = read_dataset(path)
    assert data.dimension == 10
    assert len(data) == 2


@pytest.mark.parametrize('header', ['# dimension=abc', '# dimension=0', '# dimension='])
def test_sparse_text_malformed_header(tmp_path, header):
    path = tmp_path / 'bad_header.txt'
    path.write_text(f'{header}\n+1 0:1\n')
    with pytest.raises(DataError, match='line 1'):
        read_dataset(path)


def test_model_documents_roundtrip(tmp_path):
    model = RulesFirstModel(
        RuleSet((Rule(2, 1, 7), Rule(0, -1, 3))),
        LinearModel(weights=np.array([0.1, -0.2, 0.3]), bias=0.5,
                    norm_regime=NormRegime.l2_ball(2.0), margin_scale=2.0),
    )
    path = tmp_path / 'model.json'
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.rule_set == model.rule_set
    assert np.array_equal(loaded.linear.weights, model.linear.weights)
    assert loaded.linear.norm_regime == model.linear.norm_regime
    assert loaded.linear.margin_scale == 2.0
    assert json.loads(path.read_text())['format_version'] == 1


def test_model_document_errors():
    document = model_to_dict(linear([1.0]))
    document['format_version'] = 99
    with pytest.raises(DataError, match='format version'):
        model_from_dict(document)
    with pytest.raises(DataError, match='Unknown model kind'):
        model_from_dict({'format_version': 1, 'model': {'kind': 'tree'}})
