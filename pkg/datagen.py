"""
Synthetic data generators and realizability checks.

Provides:
1. gen_synthetic - Bernoulli rule coordinates plus Gaussian standard coordinates;
   labeled +1 when a rule fires, else by sign(<w_star, x>)
2. gen_lower_bound - the finite support of the mixed lower-bound distribution
   (k positives (e_i + a)/sqrt(2), B^2 negatives e_{k+i}, a = (1/B) sum e_{k+i})
3. check_kb_realizable / check_weak_realizable - certificate checks
4. synthetic_certificate / weak_certificate / lower_bound_certificate - the
   certificates those checks accept
5. table1_family - the synthetic family used by the sample-size comparison
"""

import logging
import math
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, model_validator

from rules_first_core import NORM_SLACK, ConfigError, DataError, Dataset, sign

logger = logging.getLogger(__name__)


class SyntheticSpec(BaseModel):
    """Parameters of the synthetic rules-plus-linear distribution."""

    model_config = ConfigDict(frozen=True)

    d_total: int = Field(420, ge=1)
    k: int = Field(20, ge=0, description="Rule coordinates occupy indices 0..k-1")
    p_rule: float = Field(1 / 60, ge=0, lt=1)
    gauss_mean: float = -0.02
    gauss_var: float = Field(1.0, gt=0)
    w_star: Optional[Tuple[float, ...]] = Field(
        None, description="Weights on the d_total - k standard coordinates (default all ones)"
    )
    rule_shift: float = Field(
        0.0, ge=0, description="Amount by which a firing rule lowers <w_star, x> on the standard coordinates"
    )
    seed: int = Field(0, ge=0)

    @model_validator(mode='after')
    def _check_shape(self) -> 'SyntheticSpec':
        if self.k >= self.d_total:
            raise ValueError(f"k ({self.k}) must be smaller than d_total ({self.d_total})")
        if self.w_star is not None and len(self.w_star) != self.d_total - self.k:
            raise ValueError(f"w_star needs {self.d_total - self.k} entries, got {len(self.w_star)}")
        if self.rule_shift and not np.any(self.standard_weights):
            raise ValueError("rule_shift needs a nonzero w_star")
        return self

    @property
    def standard_weights(self) -> np.ndarray:
        if self.w_star is None:
            return np.ones(self.d_total - self.k)
        return np.array(self.w_star, dtype=float)

    @property
    def full_weights(self) -> np.ndarray:
        """w_star embedded in dimension d_total, zero on the rule coordinates."""
        return np.concatenate([np.zeros(self.k), self.standard_weights])

    @property
    def rule_probability(self) -> float:
        """Chance that at least one rule coordinate fires."""
        return 1.0 - (1.0 - self.p_rule) ** self.k


class LowerBoundSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(..., ge=1)
    B: int = Field(..., ge=1)

    @property
    def dimension(self) -> int:
        return self.k + self.B ** 2


class Certificate(NamedTuple):
    kappa: Tuple[int, ...]
    weights: np.ndarray
    B: float


def gen_synthetic(spec: SyntheticSpec, m: int, seed: Optional[int] = None) -> Dataset:
    """
    Draw m examples from the synthetic distribution.

    Args:
        spec: SyntheticSpec
        m: Number of examples (>= 1)
        seed: Overrides spec.seed when given

    Returns:
        Dataset of dimension spec.d_total; bit-identical for identical (spec, m, seed)
    """
    if m < 1:
        raise ConfigError(f"m must be positive, got {m}")
    rng = np.random.default_rng(spec.seed if seed is None else seed)

    rules = (rng.random((m, spec.k)) < spec.p_rule).astype(float)
    standard = rng.normal(spec.gauss_mean, math.sqrt(spec.gauss_var), size=(m, spec.d_total - spec.k))
    if spec.rule_shift:
        w_star = spec.standard_weights
        fired = rules.any(axis=1)
        standard[fired] -= spec.rule_shift * w_star / (w_star @ w_star)
    labels = np.where(rules.any(axis=1), 1, sign(standard @ spec.standard_weights))

    features = sp.hstack([sp.csr_matrix(rules), sp.csr_matrix(standard)], format='csr')
    return Dataset(features, labels, spec.d_total)


def gen_lower_bound(spec: LowerBoundSpec) -> Dataset:
    """The k + B^2 support points of the lower-bound distribution, each of unit l2 norm."""
    k, B = spec.k, spec.B
    features = np.zeros((spec.dimension, spec.dimension))
    for i in range(k):
        features[i, i] = 1.0
        features[i, k:] = 1.0 / B
    features[:k] /= math.sqrt(2.0)
    features[k:, k:] = np.eye(B ** 2)
    labels = np.concatenate([np.ones(k), -np.ones(B ** 2)])
    return Dataset.from_dense(features, labels)


TABLE1_STANDARD_DIM = 4


def table1_family(k: int, B: int, seed: int = 0) -> SyntheticSpec:
    """
    Synthetic family for the sample-size comparison at a given (k, B).

    Four standard coordinates with variance 1/4 and zero mean, so <w_star, x> has
    unit variance, and k rule coordinates firing with probability 1/(4k) each. A
    firing rule lowers <w_star, x> by B, so a single linear predictor needs rule
    weights that grow with B while the distribution of uncovered examples does not
    change.
    """
    if k < 1 or B < 1:
        raise ConfigError(f"k and B must be positive, got k={k}, B={B}")
    return SyntheticSpec(
        d_total=k + TABLE1_STANDARD_DIM,
        k=k,
        p_rule=1.0 / (4 * k),
        gauss_mean=0.0,
        gauss_var=1.0 / TABLE1_STANDARD_DIM,
        rule_shift=float(B),
        seed=seed,
    )


# ============================================================================
# Realizability
# ============================================================================

def _covered(data: Dataset, kappa: Sequence[int]) -> np.ndarray:
    kappa = list(kappa)
    if not kappa or len(data) == 0:
        return np.zeros(len(data), dtype=bool)
    return np.asarray(data.positive_columns[:, kappa].sum(axis=1)).ravel() > 0


def check_kb_realizable(data: Dataset, kappa: Sequence[int], w: np.ndarray, B: float) -> bool:
    """
    True iff (kappa, w) certifies (k, B)-realizability of the data.

    Every example on which a kappa feature fires must be labeled +1, every other
    example needs y<w, x> >= 1, and ||w||_2^2 <= B^2 up to round-off slack.
    """
    w = np.asarray(w, dtype=float)
    if float(w @ w) > B ** 2 * (1 + NORM_SLACK):
        return False
    if len(data) == 0:
        return True
    covered = _covered(data, kappa)
    if np.any(data.labels[covered] != 1):
        return False
    rest = ~covered
    margins = data.labels[rest] * (data.features[rest] @ w)
    return bool(np.all(margins >= 1 - NORM_SLACK))


def check_weak_realizable(data: Dataset, w_a: np.ndarray, w_b: np.ndarray, k: int, B: float) -> bool:
    """True iff ||w_a||_2 <= B, ||w_b||_0 <= k and y<w_a + w_b, x> >= 1 everywhere."""
    w_a = np.asarray(w_a, dtype=float)
    w_b = np.asarray(w_b, dtype=float)
    if np.linalg.norm(w_a) > B * (1 + NORM_SLACK):
        return False
    if np.count_nonzero(w_b) > k:
        return False
    if len(data) == 0:
        return True
    margins = data.labels * (data.features @ (w_a + w_b))
    return bool(np.all(margins >= 1 - NORM_SLACK))


def synthetic_certificate(spec: SyntheticSpec, data: Dataset) -> Certificate:
    """
    Rule coordinates plus w_star rescaled by the realized minimum margin.

    B is the norm of the rescaled vector, so check_kb_realizable accepts the result.

    Raises:
        DataError: if some uncovered example sits exactly on the w_star hyperplane
    """
    kappa = tuple(range(spec.k))
    weights = spec.full_weights
    rest = ~_covered(data, kappa)
    if rest.any():
        min_margin = float(np.min(data.labels[rest] * (data.features[rest] @ weights)))
        if min_margin <= 0:
            raise DataError("Synthetic sample has an uncovered example with zero margin")
        weights = weights / min_margin
    return Certificate(kappa=kappa, weights=weights, B=float(np.linalg.norm(weights)))


def weak_certificate(data: Dataset, kappa: Sequence[int], w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split a (kappa, w) certificate into (w_a, w_b) for weak realizability.

    w_b is the indicator of kappa times the smallest lambda >= 0 lifting every
    covered example to margin 1.
    """
    w_a = np.asarray(w, dtype=float).copy()
    indicator = np.zeros(data.dimension)
    indicator[list(kappa)] = 1.0
    covered = _covered(data, kappa)

    scale = 0.0
    if covered.any():
        rows = data.features[covered]
        lift = rows @ indicator
        needed = (1.0 - data.labels[covered] * (rows @ w_a)) / lift
        scale = max(0.0, float(needed.max()))
    return w_a, scale * indicator


def lower_bound_certificate(spec: LowerBoundSpec) -> Certificate:
    """kappa = the k positive coordinates, w = -1 on each of the B^2 negative coordinates."""
    weights = np.concatenate([np.zeros(spec.k), -np.ones(spec.B ** 2)])
    return Certificate(kappa=tuple(range(spec.k)), weights=weights, B=float(spec.B))
