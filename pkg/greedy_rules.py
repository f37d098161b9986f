"""
Rule discovery and greedy rules-first learners.

This module implements:
1. find_perfect_rules - features whose firing examples all carry one label
2. greedy_rule - the GreedyRule algorithm: admit high-coverage perfect rules,
   discard covered examples, then fit a norm-bounded hinge classifier on the rest
3. greedy_eval_loss - forward selection of rules by evaluation mis-classification
   loss, retraining a penalized logistic classifier at every tentative step
4. select_near_rules - near-rule candidates for noisy text data, scored by sqrt(M) * p
5. rank_rule_candidates - purity-ordered candidate pool for the synthetic experiments
6. replay_greedy_selection - audit that each chosen rule was perfect when chosen
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from linear_trainers import TrainConfig, train_constrained_hinge, train_penalized_logistic
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
)

logger = logging.getLogger(__name__)


class GreedyConfig(BaseModel):
    """Parameters of the GreedyRule algorithm."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(..., ge=1, description="Target rule count")
    B: float = Field(..., gt=0, description="Norm bound of the linear part")
    coverage_constant: float = Field(100.0, gt=0)
    train: Optional[TrainConfig] = None
    tie_break: Literal['lowest_index', 'highest_index'] = 'lowest_index'
    polarities: Tuple[int, ...] = (1,)

    @field_validator('polarities')
    @classmethod
    def _distinct_polarities(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value or any(p not in (-1, 1) for p in value) or len(set(value)) != len(value):
            raise ValueError(f"polarities must be distinct values from (+1, -1), got {value}")
        return tuple(value)

    @model_validator(mode='after')
    def _ball_regime(self) -> 'GreedyConfig':
        if self.train is not None and not self.train.norm_regime.is_ball:
            raise ValueError(f"GreedyRule trains under a ball constraint, got {self.train.norm_regime}")
        return self

    @property
    def train_config(self) -> TrainConfig:
        """The hinge trainer settings; defaults to L2_BALL(B)."""
        return self.train or TrainConfig(norm_regime=NormRegime.l2_ball(self.B))

    def coverage_threshold(self, m: int) -> float:
        """A rule must cover strictly more than m / (c * k * (B + 1)) examples."""
        return m / (self.coverage_constant * self.k * (self.B + 1))

    @property
    def max_rules(self) -> int:
        return math.ceil(self.coverage_constant * self.k * (self.B + 1))


class NearRuleConfig(BaseModel):
    """Count and purity floors for near-rule pre-selection."""

    model_config = ConfigDict(frozen=True)

    min_count_pos: int = Field(16, ge=1)
    min_count_neg: int = Field(4, ge=1)
    min_prob_pos: float = Field(0.9, gt=0.5, le=1.0)
    min_prob_neg: float = Field(0.75, gt=0.5, le=1.0)
    top_k: int = Field(50, ge=1)


class NearRule(NamedTuple):
    feature_index: int
    fired_label: int
    score: float


@dataclass(frozen=True, eq=False)
class GreedyEvalResult:
    """Model chosen by greedy_eval_loss and the evaluation loss after each accepted step."""

    model: RulesFirstModel
    history: Tuple[float, ...]

    @property
    def rule_set(self) -> RuleSet:
        return self.model.rule_set


# ============================================================================
# Rule statistics
# ============================================================================

def _column_counts(data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Per-feature firing counts M_j and counts of those with label +1."""
    firing = data.positive_columns
    counts = np.asarray(firing.sum(axis=0)).ravel()
    positives = np.asarray(firing.T @ (data.labels == 1).astype(float)).ravel()
    return counts, positives


def find_perfect_rules(data: Dataset, for_label: int) -> List[Tuple[int, int]]:
    """
    Every feature j whose firing examples (x(j) > 0) all carry `for_label`.

    Returns:
        List of (feature_index, coverage_count), coverage descending then index ascending.
        Features that never fire are excluded.
    """
    if for_label not in (-1, 1):
        raise ConfigError(f"for_label must be -1 or +1, got {for_label}")
    counts, positives = _column_counts(data)
    agreeing = positives if for_label == 1 else counts - positives
    perfect = np.flatnonzero((counts > 0) & (agreeing == counts))
    order = np.lexsort((perfect, -counts[perfect]))
    return [(int(j), int(counts[j])) for j in perfect[order]]


# ============================================================================
# GreedyRule
# ============================================================================

def greedy_rule(data: Dataset, config: GreedyConfig) -> RulesFirstModel:
    """
    Learn a rules-first model with the GreedyRule algorithm.

    While some perfect rule on the remaining examples covers more than
    m / (c * k * (B + 1)) of them, add the one with the largest coverage and
    discard every example it fires on. The linear part is then trained with
    the constrained hinge trainer on what is left.

    Args:
        data: Non-empty training set
        config: GreedyConfig

    Returns:
        RulesFirstModel; the linear part is the zero model if every example got covered
    """
    data.require_nonempty()
    threshold = config.coverage_threshold(len(data))
    remaining = np.ones(len(data), dtype=bool)
    rule_set = RuleSet()

    while remaining.any():
        current = data.subset(remaining)
        admitted = [
            (j, label, coverage)
            for label in config.polarities
            for j, coverage in find_perfect_rules(current, label)
            if coverage > threshold
        ]
        if not admitted:
            break
        if config.tie_break == 'highest_index':
            j, label, coverage = max(admitted, key=lambda c: (c[2], c[0]))
        else:
            j, label, coverage = max(admitted, key=lambda c: (c[2], -c[0]))

        rule_set = rule_set.with_rule(Rule(j, label, coverage))
        remaining &= ~data.fires(j)
        logger.info(f"GreedyRule: rule {len(rule_set)} = feature {j} -> {label:+d}, covers {coverage}")

    train_config = config.train_config
    remainder = data.subset(remaining)
    if len(remainder) == 0:
        linear = LinearModel.zeros(data.dimension, train_config.norm_regime)
    else:
        linear = train_constrained_hinge(remainder, train_config)
    return RulesFirstModel(rule_set=rule_set, linear=linear)


def replay_greedy_selection(data: Dataset, model: RulesFirstModel) -> bool:
    """True iff every rule, in order, was a perfect rule on the examples left at its turn."""
    remaining = np.ones(len(data), dtype=bool)
    for rule in model.rule_set:
        fired = data.fires(rule.feature_index) & remaining
        if not fired.any():
            return False
        if np.any(data.labels[fired] != rule.fired_label):
            return False
        if rule.coverage and rule.coverage != int(fired.sum()):
            return False
        remaining &= ~fired
    return True


# ============================================================================
# Evaluation-loss greedy
# ============================================================================

def fit_rules_first_logistic(
    rule_set: RuleSet,
    data: Dataset,
    train_cfg: TrainConfig,
    initial: Optional[LinearModel] = None,
) -> RulesFirstModel:
    """Logistic training on examples no rule fires on, rule columns zeroed."""
    if len(rule_set) == 0:
        rows = data
    else:
        rows = data.subset(~rule_set.covered(data)).with_zeroed_columns(rule_set.feature_indices)
    if len(rows) == 0:
        linear = LinearModel.zeros(data.dimension, train_cfg.norm_regime)
    else:
        linear = train_penalized_logistic(rows, train_cfg, initial=initial)
    return RulesFirstModel(rule_set=rule_set, linear=linear)


def greedy_eval_loss(
    train: Dataset,
    eval: Dataset,
    candidates: Sequence[Tuple[int, int]],
    budget: int,
    train_cfg: TrainConfig,
    refit: Optional[Dataset] = None,
    early_stop: bool = True,
) -> GreedyEvalResult:
    """
    Forward selection of rules by evaluation mis-classification loss.

    At each of `budget` steps every remaining candidate is tried: the linear part is
    retrained on the training examples not covered by the tentative rule set, and the
    candidate with the lowest evaluation error is kept (earliest candidate on ties).

    Args:
        train: Training set
        eval: Evaluation set used to score candidates
        candidates: (feature_index, fired_label) pairs, in priority order
        budget: Maximum number of rules
        train_cfg: TrainConfig with an L2_PENALTY or L1_PENALTY regime
        refit: Dataset for the final retrain with the chosen rules (default: train)
        early_stop: Stop as soon as no candidate strictly lowers the evaluation loss

    Returns:
        GreedyEvalResult with the refit model and the loss history (baseline first)
    """
    train.require_nonempty()
    eval.require_nonempty()
    if budget < 0:
        raise ConfigError(f"budget must be non-negative, got {budget}")
    if train_cfg.norm_regime.is_ball:
        raise ConfigError(f"Evaluation-loss greedy needs a penalty regime, got {train_cfg.norm_regime}")

    pool = []
    for j, label in candidates:
        j, label = int(j), int(label)
        if not 0 <= j < train.dimension:
            raise DataError(f"Candidate feature {j} outside dimension {train.dimension}")
        if label not in (-1, 1):
            raise ConfigError(f"Candidate label must be -1 or +1, got {label}")
        if j not in [c[0] for c in pool]:
            pool.append((j, label))

    chosen = RuleSet()
    current = fit_rules_first_logistic(chosen, train, train_cfg)
    history = [error_rate(current, eval)]

    for step in range(budget):
        uncovered = ~chosen.covered(train)
        best = None
        for j, label in pool:
            if j in chosen.feature_indices:
                continue
            coverage = int((train.fires(j) & uncovered).sum())
            trial = fit_rules_first_logistic(chosen.with_rule(Rule(j, label, coverage)), train, train_cfg,
                                   initial=current.linear)
            loss = error_rate(trial, eval)
            if best is None or loss < best[0]:
                best = (loss, trial)
        if best is None:
            break
        loss, trial = best
        if early_stop and loss >= history[-1]:
            logger.debug(f"Greedy eval: no candidate improves {history[-1]:.4f} at step {step + 1}")
            break
        chosen, current = trial.rule_set, trial
        history.append(loss)
        added = chosen.rules[-1]
        logger.info(f"Greedy eval: rule {len(chosen)} = feature {added.feature_index} -> "
                    f"{added.fired_label:+d}, eval error {loss:.4f}")

    final = fit_rules_first_logistic(chosen, train if refit is None else refit, train_cfg)
    return GreedyEvalResult(model=final, history=tuple(history))


# ============================================================================
# Candidate pools
# ============================================================================

def select_near_rules(data: Dataset, config: NearRuleConfig, score_threshold: float) -> List[NearRule]:
    """
    Near-rule candidates scored by sqrt(M_j) * p_j.

    M_j counts examples with x(j) > 0 and p_j is the fraction of them carrying the
    rule's label. Candidates below the count or probability floor of their polarity
    are dropped; positive rules must score at least 4 * score_threshold, negative
    rules at least score_threshold. At most config.top_k are returned, best first.
    """
    data.require_nonempty()
    if not data.is_binary():
        raise DataError("Near-rule selection needs binary {0,1} features")

    counts, positives = _column_counts(data)
    selected = []
    for label, agreeing, min_count, min_prob, bar in (
        (1, positives, config.min_count_pos, config.min_prob_pos, 4 * score_threshold),
        (-1, counts - positives, config.min_count_neg, config.min_prob_neg, score_threshold),
    ):
        with np.errstate(divide='ignore', invalid='ignore'):
            purity = np.where(counts > 0, agreeing / counts, 0.0)
        scores = np.sqrt(counts) * purity
        keep = (counts >= min_count) & (purity >= min_prob) & (scores >= bar)
        selected.extend(NearRule(int(j), label, float(scores[j])) for j in np.flatnonzero(keep))

    selected.sort(key=lambda r: (-r.score, r.feature_index, -r.fired_label))
    return selected[:config.top_k]


def rank_rule_candidates(
    data: Dataset, limit: Optional[int] = None, min_purity: float = 0.0
) -> List[Tuple[int, int]]:
    """
    (feature_index, fired_label) pairs ordered by purity, then count, then index.

    Each firing feature appears once, with its majority label (+1 on an even split).
    Features whose majority share is below `min_purity` are left out.
    """
    counts, positives = _column_counts(data)
    firing = np.flatnonzero(counts > 0)
    purity_pos = positives[firing] / counts[firing]
    labels = np.where(purity_pos >= 0.5, 1, -1)
    purity = np.maximum(purity_pos, 1.0 - purity_pos)
    order = np.lexsort((firing, -counts[firing], -purity))
    ranked = [(int(firing[i]), int(labels[i])) for i in order if purity[i] >= min_purity]
    return ranked if limit is None else ranked[:limit]
