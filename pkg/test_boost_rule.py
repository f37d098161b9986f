"""
Tests for BoostRule.
"""

import math

import numpy as np
import pytest

from boost_rule import EPSILON_CLAMP, BoostedModel, boost_rule, predict_boosted
from datagen import SyntheticSpec, gen_synthetic, synthetic_certificate
from greedy_rules import GreedyConfig
from rules_first_core import (
    ConfigError,
    DataError,
    Dataset,
    LinearModel,
    NormRegime,
    Rule,
    RuleSet,
    RulesFirstModel,
    error_rate,
    load_model,
    save_model,
)


def rule_separable():
    features = np.array([[1.0, 0.0]] * 10 + [[0.0, -1.0]] * 10)
    return Dataset.from_dense(features, [1] * 10 + [-1] * 10)


def realizable(m=800):
    spec = SyntheticSpec(k=10, d_total=110)
    data = gen_synthetic(spec, m, seed=3)
    return data, GreedyConfig(k=spec.k, B=synthetic_certificate(spec, data).B)


def test_single_round_matches_its_stage():
    data, config = realizable()
    model = boost_rule(data, config, rounds=1, seed=0)
    assert len(model.stages) == 1
    stage, alpha = model.stages[0]
    assert alpha > 0
    assert np.array_equal(predict_boosted(model, data), stage.predict_labels(data))


def test_zero_error_caps_alpha_and_stops():
    model = boost_rule(rule_separable(), GreedyConfig(k=1, B=1), rounds=5, seed=0)
    assert len(model.stages) == 1
    assert model.stages[0][1] == pytest.approx(0.5 * math.log((1 - EPSILON_CLAMP) / EPSILON_CLAMP))
    assert model.stages[0][1] == pytest.approx(0.5 * math.log(1e8), rel=1e-6)
    assert error_rate(model, rule_separable()) == 0.0


def test_training_error_below_adaboost_bound():
    data, config = realizable()
    model = boost_rule(data, config, rounds=5, seed=1)
    assert len(model.weighted_errors) == len(model.stages)
    assert all(0 < e < 0.5 for e in model.weighted_errors)
    assert error_rate(model, data) <= model.training_error_bound() + 1e-12


def test_boost_rule_is_deterministic():
    data, config = realizable(400)
    first = boost_rule(data, config, rounds=3, seed=5)
    second = boost_rule(data, config, rounds=3, seed=5)
    assert [alpha for _, alpha in first.stages] == [alpha for _, alpha in second.stages]
    assert np.array_equal(first.scores(data), second.scores(data))


def test_boost_rule_argument_errors():
    with pytest.raises(DataError, match='empty dataset'):
        boost_rule(Dataset.empty(2), GreedyConfig(k=1, B=1), rounds=3, seed=0)
    with pytest.raises(ConfigError):
        boost_rule(rule_separable(), GreedyConfig(k=1, B=1), rounds=0, seed=0)


def test_boosted_model_validation():
    stage = RulesFirstModel(RuleSet((Rule(0, 1),)), LinearModel.zeros(2, NormRegime.l2_ball(1.0)))
    with pytest.raises(ConfigError):
        BoostedModel(stages=((stage, math.inf),), rounds=1)
    with pytest.raises(ConfigError):
        BoostedModel(stages=((stage, 1.0),), rounds=1, weighted_errors=(0.1, 0.2))


def test_boosted_vote_uses_sign_zero_negative():
    positive = RulesFirstModel(RuleSet((Rule(0, 1),)), LinearModel.zeros(2, NormRegime.l2_ball(1.0)))
    negative = RulesFirstModel(RuleSet(), LinearModel.zeros(2, NormRegime.l2_ball(1.0)))
    model = BoostedModel(stages=((positive, 1.0), (negative, 1.0)), rounds=2)
    data = Dataset.from_dense([[1.0, 0.0], [0.0, 0.0]], [1, -1])
    assert list(model.scores(data)) == [0.0, -2.0]
    assert list(model.predict_labels(data)) == [-1, -1]


def test_boosted_model_file_roundtrip(tmp_path):
    data, config = realizable(400)
    model = boost_rule(data, config, rounds=2, seed=2)
    path = tmp_path / 'boosted.json'
    save_model(model, path)
    loaded = load_model(path)
    assert isinstance(loaded, BoostedModel)
    assert loaded.weighted_errors == model.weighted_errors
    assert np.array_equal(loaded.predict_labels(data), model.predict_labels(data))
