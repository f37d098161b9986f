"""
BoostRule: AdaBoost with GreedyRule as the weak learner.

GreedyRule consumes unweighted samples with count-based coverage thresholds, so
each round trains on a weighted resample (with replacement, size m) of the data
and measures the weighted error on the original sample.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from greedy_rules import GreedyConfig, greedy_rule
from rules_first_core import (
    ConfigError,
    Dataset,
    RulesFirstDocument,
    RulesFirstModel,
    rules_first_from_document,
    rules_first_to_document,
    sign,
)

logger = logging.getLogger(__name__)

EPSILON_CLAMP = 1e-8
MAX_RETRIES = 3


@dataclass(frozen=True, eq=False)
class BoostedModel:
    """Weighted vote of rules-first models: sign(sum alpha_t * h_t(x)), sign(0) = -1."""

    stages: Tuple[Tuple[RulesFirstModel, float], ...]
    rounds: int
    weighted_errors: Tuple[float, ...] = ()

    def __post_init__(self):
        stages = tuple((model, float(alpha)) for model, alpha in self.stages)
        for model, alpha in stages:
            if not math.isfinite(alpha):
                raise ConfigError(f"Stage weight must be finite, got {alpha}")
        if len({model.dimension for model, _ in stages}) > 1:
            raise ConfigError("All stages must share one dimension")
        if self.weighted_errors and len(self.weighted_errors) != len(stages):
            raise ConfigError("weighted_errors must have one entry per stage")
        object.__setattr__(self, 'stages', stages)
        object.__setattr__(self, 'weighted_errors', tuple(float(e) for e in self.weighted_errors))

    @property
    def dimension(self) -> int:
        return self.stages[0][0].dimension if self.stages else 0

    def scores(self, data: Dataset) -> np.ndarray:
        total = np.zeros(len(data))
        for model, alpha in self.stages:
            total += alpha * model.predict_labels(data)
        return total

    def predict_labels(self, data: Dataset) -> np.ndarray:
        return sign(self.scores(data))

    def training_error_bound(self) -> float:
        """AdaBoost bound prod_t 2 sqrt(eps_t (1 - eps_t)) on the training error."""
        errors = np.asarray(self.weighted_errors, dtype=float)
        return float(np.prod(2.0 * np.sqrt(errors * (1.0 - errors))))


def boost_rule(data: Dataset, config: GreedyConfig, rounds: int, seed: int) -> BoostedModel:
    """
    Run AdaBoost over example weights with GreedyRule as the weak learner.

    Each round draws a seeded weighted resample, trains greedy_rule on it and
    computes the weighted error eps on the original sample. A round with eps >= 1/2
    is redrawn up to MAX_RETRIES times before boosting stops. eps is clamped to
    [1e-8, 1 - 1e-8] for alpha = ln((1 - eps) / eps) / 2; a weak learner with zero
    weighted error ends boosting after its stage.

    Args:
        data: Non-empty training set
        config: GreedyConfig for every weak learner
        rounds: Maximum number of stages
        seed: Seed of the resampling generator

    Returns:
        BoostedModel with the accepted stages and their weighted errors
    """
    data.require_nonempty()
    if rounds < 1:
        raise ConfigError(f"rounds must be positive, got {rounds}")

    m = len(data)
    weights = np.full(m, 1.0 / m)
    rng = np.random.default_rng(seed)
    stages: List[Tuple[RulesFirstModel, float]] = []
    errors: List[float] = []

    for t in range(rounds):
        for attempt in range(MAX_RETRIES + 1):
            sample = rng.choice(m, size=m, replace=True, p=weights)
            learner = greedy_rule(data.subset(sample), config)
            predictions = learner.predict_labels(data)
            epsilon = float(weights[predictions != data.labels].sum())
            if epsilon < 0.5:
                break
            logger.debug(f"Round {t + 1}: weighted error {epsilon:.4f} >= 1/2, redrawing")
        else:
            logger.info(f"Boosting stopped after {t} rounds: no weak learner with error below 1/2")
            break

        clamped = min(max(epsilon, EPSILON_CLAMP), 1.0 - EPSILON_CLAMP)
        alpha = 0.5 * math.log((1.0 - clamped) / clamped)
        stages.append((learner, alpha))
        errors.append(clamped)
        logger.info(f"Round {t + 1}: eps={epsilon:.4f}, alpha={alpha:.4f}, rules={len(learner.rule_set)}")

        if epsilon <= EPSILON_CLAMP:
            break
        weights = weights * np.exp(-alpha * data.labels * predictions)
        weights /= weights.sum()
        assert abs(weights.sum() - 1.0) <= 1e-9

    return BoostedModel(stages=tuple(stages), rounds=rounds, weighted_errors=tuple(errors))


def predict_boosted(model: BoostedModel, data: Dataset) -> np.ndarray:
    return model.predict_labels(data)


# ============================================================================
# Documents
# ============================================================================

class BoostStageDocument(BaseModel):
    weight: float
    weighted_error: Optional[float] = None
    model: RulesFirstDocument


class BoostedDocument(BaseModel):
    kind: Literal['boosted'] = 'boosted'
    rounds: int
    stages: List[BoostStageDocument]


def boosted_to_document(model: BoostedModel) -> BoostedDocument:
    errors = model.weighted_errors or (None,) * len(model.stages)
    return BoostedDocument(
        rounds=model.rounds,
        stages=[
            BoostStageDocument(weight=alpha, weighted_error=error, model=rules_first_to_document(stage))
            for (stage, alpha), error in zip(model.stages, errors)
        ],
    )


def boosted_from_document(doc: BoostedDocument) -> BoostedModel:
    errors = tuple(s.weighted_error for s in doc.stages)
    return BoostedModel(
        stages=tuple((rules_first_from_document(s.model), s.weight) for s in doc.stages),
        rounds=doc.rounds,
        weighted_errors=() if None in errors else errors,
    )
