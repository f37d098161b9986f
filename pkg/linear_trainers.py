"""
Norm-constrained and penalized linear trainers.

This module implements:
1. project_l2 / project_l1 - Euclidean projections onto the l2 and l1 balls
2. train_constrained_hinge - projected subgradient descent on the mean hinge loss
3. train_penalized_logistic - logistic regression with an l2 or l1 penalty and a free bias
4. train_convex_relaxation - w = w_a + w_b, w_a in an l2 ball and w_b in an l1 ball
5. min_norm_margin_solver - smallest-norm w with y<w, x> >= 1, by binary search over B

All trainers are pure functions of (data, config) and return LinearModel instances.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize
from scipy.sparse.linalg import norm as sparse_norm
from scipy.special import expit

from rules_first_core import (
    ConfigError,
    DataError,
    Dataset,
    LinearModel,
    NormKind,
    NormRegime,
    loss_hinge,
)

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """Optimizer settings shared by the linear trainers."""

    model_config = ConfigDict(frozen=True)

    norm_regime: NormRegime = Field(default_factory=lambda: NormRegime.l2_ball(1.0))
    max_epochs: int = Field(200, ge=1)
    eta0: float = Field(0.5, gt=0, description="Step scale: eta0 / sqrt(t + 1) for hinge, eta0 / L for logistic gd")
    seed: int = Field(0, ge=0, lt=2 ** 64)
    tolerance: float = Field(1e-6, gt=0)
    patience: int = Field(5, ge=1, description="Epochs without tolerance-sized improvement before stopping")
    batch_size: Optional[int] = Field(64, ge=1, description="Mini-batch size; None means full batch")
    fit_bias: bool = False
    solver: Literal['gd', 'lbfgs'] = 'gd'

    def with_regime(self, norm_regime: NormRegime) -> 'TrainConfig':
        return self.model_copy(update={'norm_regime': norm_regime})


# ============================================================================
# Projections
# ============================================================================

def _check_radius(B: float) -> None:
    if not B > 0:
        raise ConfigError(f"Ball radius must be positive, got {B}")


def project_l2(v: np.ndarray, B: float) -> np.ndarray:
    """Euclidean projection onto {w : ||w||_2 <= B} (radial scaling)."""
    _check_radius(B)
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= B:
        return v.copy()
    return v * (B / norm)


def project_l1(v: np.ndarray, B: float) -> np.ndarray:
    """
    Euclidean projection onto {w : ||w||_1 <= B}.

    Soft-thresholds |v| with the exact threshold found by sorting the absolute
    values in decreasing order.
    """
    _check_radius(B)
    v = np.asarray(v, dtype=float)
    magnitudes = np.abs(v)
    if magnitudes.sum() <= B:
        return v.copy()

    ordered = np.sort(magnitudes)[::-1]
    excess = np.cumsum(ordered) - B
    ranks = np.arange(1, ordered.size + 1)
    support = ordered - excess / ranks > 0
    rho = ranks[support][-1]
    theta = excess[support][-1] / rho
    return np.sign(v) * np.maximum(magnitudes - theta, 0.0)


def _projector(regime: NormRegime) -> Callable[[np.ndarray], np.ndarray]:
    if regime.kind == NormKind.L2_BALL:
        return lambda w: project_l2(w, regime.value)
    if regime.kind == NormKind.L1_BALL:
        return lambda w: project_l1(w, regime.value)
    raise ConfigError(f"Constrained training needs an L2_BALL or L1_BALL regime, got {regime}")


# ============================================================================
# Projected subgradient descent on the hinge loss
# ============================================================================

def _mean_hinge(data: Dataset, weights: np.ndarray, bias: float) -> float:
    return float(np.mean(loss_hinge(data.features @ weights + bias, data.labels)))


def _projected_subgradient(
    data: Dataset,
    config: TrainConfig,
    projectors: Sequence[Callable[[np.ndarray], np.ndarray]],
    initial: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[List[np.ndarray], float, float]:
    """
    Minimize the mean hinge loss of sum(blocks) by projected mini-batch subgradient steps.

    Every weight block receives the same subgradient and is projected onto its own
    feasible set after each update. Returns the best iterate seen (not the last).
    """
    data.require_nonempty()
    X = data.features
    y = data.labels.astype(float)
    m, d = X.shape

    blocks = [np.zeros(d) if initial is None else np.array(initial[i], dtype=float)
              for i in range(len(projectors))]
    bias = 0.0
    rng = np.random.default_rng(config.seed)
    batch = min(config.batch_size or m, m)

    best_blocks = [b.copy() for b in blocks]
    best_bias = bias
    best_objective = _mean_hinge(data, sum(blocks), bias)
    step = 0
    stale = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(m)
        for start in range(0, m, batch):
            rows = order[start:start + batch]
            Xb, yb = X[rows], y[rows]
            margins = yb * (Xb @ sum(blocks) + bias)
            violated = yb * (margins < 1)
            eta = config.eta0 / math.sqrt(step + 1)
            step += 1
            if not violated.any():
                continue
            gradient = -(Xb.T @ violated) / rows.size
            blocks = [project(w - eta * gradient) for w, project in zip(blocks, projectors)]
            if config.fit_bias:
                bias += eta * violated.sum() / rows.size

        objective = _mean_hinge(data, sum(blocks), bias)
        improvement = best_objective - objective
        if objective < best_objective:
            best_blocks = [b.copy() for b in blocks]
            best_bias = bias
            best_objective = objective
        stale = stale + 1 if improvement < config.tolerance else 0
        if best_objective == 0.0 or stale >= config.patience:
            logger.debug(f"Hinge training stopped after {epoch + 1} epochs, loss {best_objective:.6g}")
            break

    return best_blocks, best_bias, best_objective


def train_constrained_hinge(
    data: Dataset,
    config: TrainConfig,
    initial: Optional[LinearModel] = None,
) -> LinearModel:
    """
    Minimize the mean hinge loss subject to the config's ball constraint.

    Args:
        data: Non-empty training set
        config: TrainConfig with an L2_BALL or L1_BALL norm regime
        initial: Optional model whose weights start the iteration

    Returns:
        LinearModel holding the best iterate (always feasible)
    """
    projector = _projector(config.norm_regime)
    start = None if initial is None else [projector(initial.weights)]
    (weights,), bias, _ = _projected_subgradient(data, config, [projector], start)
    return LinearModel(weights=weights, bias=bias, norm_regime=config.norm_regime)


def train_convex_relaxation(data: Dataset, B: float, B1: float, config: TrainConfig) -> LinearModel:
    """
    Hinge training over w = w_a + w_b with ||w_a||_2 <= B and ||w_b||_1 <= B1.

    The returned regime is L2_BALL(B + B1), which the sum always satisfies.
    """
    _check_radius(B)
    _check_radius(B1)
    projectors = [lambda w: project_l2(w, B), lambda w: project_l1(w, B1)]
    (w_a, w_b), bias, loss = _projected_subgradient(data, config, projectors)
    logger.debug(f"Convex relaxation: ||w_a||_2={np.linalg.norm(w_a):.4g}, "
                 f"||w_b||_1={np.abs(w_b).sum():.4g}, hinge={loss:.4g}")
    return LinearModel(weights=w_a + w_b, bias=bias, norm_regime=NormRegime.l2_ball(B + B1))


# ============================================================================
# Penalized logistic regression
# ============================================================================

def _log_loss(weights: np.ndarray, bias: float, data: Dataset) -> Tuple[float, np.ndarray, float]:
    """Mean logistic loss and its gradient in (w, c), without the penalty."""
    y = data.labels.astype(float)
    margins = y * (data.features @ weights + bias)
    residual = -y * expit(-margins) / len(data)
    loss = float(np.mean(np.logaddexp(0.0, -margins)))
    return loss, data.features.T @ residual, float(residual.sum())


def _penalty(weights: np.ndarray, regime: NormRegime) -> Tuple[float, np.ndarray]:
    if regime.is_l1:
        return float(np.abs(weights).sum()) / regime.value, np.sign(weights) / regime.value
    return 0.5 * float(weights @ weights) / regime.value, weights / regime.value


def logistic_objective(weights: np.ndarray, bias: float, data: Dataset, regime: NormRegime) -> float:
    """(1/m) sum log(1 + exp(-y(w.x + c))) + (1/C) R(w), R = ||w||_2^2 / 2 or ||w||_1."""
    data.require_nonempty()
    return _log_loss(weights, bias, data)[0] + _penalty(weights, regime)[0]


def _smooth_part(weights: np.ndarray, bias: float, data: Dataset, regime: NormRegime):
    """Differentiable part of the objective: the log loss, plus the penalty when it is l2."""
    loss, grad_w, grad_c = _log_loss(weights, bias, data)
    if not regime.is_l1:
        value, grad_penalty = _penalty(weights, regime)
        loss, grad_w = loss + value, grad_w + grad_penalty
    return loss, grad_w, grad_c


def _lipschitz_bound(data: Dataset, regime: NormRegime) -> float:
    """Upper bound on the gradient's Lipschitz constant in (w, c); ||X||_F bounds ||X||_2."""
    frobenius = float(sparse_norm(data.features)) ** 2
    curvature = 0.0 if regime.is_l1 else 1.0 / regime.value
    return curvature + (frobenius + len(data)) / (4 * len(data))


def _logistic_gd(data: Dataset, config: TrainConfig, weights: np.ndarray, bias: float):
    """
    Proximal gradient descent with backtracking.

    The first trial step is eta0 / L for a Lipschitz bound L; it halves until the
    quadratic upper bound holds and grows again after each accepted step. The
    unpenalized bias takes a step scaled up by the l2 curvature it does not share.
    The l1 penalty is applied by soft-thresholding, so every step lowers the objective.
    """
    regime = config.norm_regime
    step = config.eta0 / _lipschitz_bound(data, regime)
    bias_scale = 1.0 if regime.is_l1 else 1.0 + 4.0 / regime.value
    max_step = 100 * step
    objective = logistic_objective(weights, bias, data, regime)
    stale = 0
    for t in range(config.max_epochs):
        smooth, grad_w, grad_c = _smooth_part(weights, bias, data, regime)
        while True:
            trial_w = weights - step * grad_w
            trial_c = bias - step * bias_scale * grad_c
            if regime.is_l1:
                trial_w = np.sign(trial_w) * np.maximum(np.abs(trial_w) - step / regime.value, 0.0)
            delta_w, delta_c = trial_w - weights, trial_c - bias
            bound = (smooth + grad_w @ delta_w + grad_c * delta_c
                     + (delta_w @ delta_w + delta_c ** 2 / bias_scale) / (2 * step))
            if _smooth_part(trial_w, trial_c, data, regime)[0] <= bound + 1e-12 or step < 1e-12:
                break
            step *= 0.5

        weights, bias = trial_w, trial_c
        previous, objective = objective, logistic_objective(weights, bias, data, regime)
        stale = stale + 1 if previous - objective < config.tolerance else 0
        if stale >= config.patience:
            logger.debug(f"Logistic GD stopped after {t + 1} iterations, objective {objective:.6g}")
            break
        step = min(2 * step, max_step)
    return weights, bias


def _logistic_lbfgs(data: Dataset, config: TrainConfig, weights: np.ndarray, bias: float):
    regime = config.norm_regime
    d = data.dimension
    inverse_C = 1.0 / regime.value

    if regime.is_l1:
        # w = w_plus - w_minus with both halves bounded below by zero
        def unpack(theta):
            return theta[:d] - theta[d:2 * d], theta[-1]

        def fun(theta):
            w, c = unpack(theta)
            loss, grad_w, grad_c = _log_loss(w, c, data)
            value = loss + inverse_C * theta[:2 * d].sum()
            return value, np.concatenate([grad_w + inverse_C, -grad_w + inverse_C, [grad_c]])

        start = np.concatenate([np.maximum(weights, 0), np.maximum(-weights, 0), [bias]])
        bounds = [(0, None)] * (2 * d) + [(None, None)]
    else:
        def unpack(theta):
            return theta[:d], theta[-1]

        def fun(theta):
            w, c = unpack(theta)
            loss, grad_w, grad_c = _log_loss(w, c, data)
            value, grad_penalty = _penalty(w, regime)
            return loss + value, np.append(grad_w + grad_penalty, grad_c)

        start = np.append(weights, bias)
        bounds = None

    result = minimize(
        fun, start, jac=True, method='L-BFGS-B', bounds=bounds,
        options={'maxiter': config.max_epochs, 'ftol': config.tolerance * 1e-3},
    )
    if not result.success:
        logger.debug(f"L-BFGS-B did not converge: {result.message}")
    return unpack(result.x)


def train_penalized_logistic(
    data: Dataset,
    config: TrainConfig,
    initial: Optional[LinearModel] = None,
) -> LinearModel:
    """
    Minimize (1/m) sum log(1 + exp(-y(w.x + c))) + (1/C) R(w) over (w, c).

    The bias c is never penalized. Solver 'gd' runs proximal gradient descent with
    backtracking (soft-thresholding for the l1 penalty), which never increases the
    objective; 'lbfgs' uses scipy's L-BFGS-B.

    Args:
        data: Non-empty training set
        config: TrainConfig with an L2_PENALTY or L1_PENALTY regime
        initial: Optional warm start

    Returns:
        LinearModel with weights and bias set
    """
    data.require_nonempty()
    regime = config.norm_regime
    if regime.is_ball:
        raise ConfigError(f"Penalized training needs an L2_PENALTY or L1_PENALTY regime, got {regime}")

    weights = np.zeros(data.dimension) if initial is None else np.array(initial.weights, dtype=float)
    bias = 0.0 if initial is None else initial.bias

    if config.solver == 'lbfgs':
        weights, bias = _logistic_lbfgs(data, config, weights, bias)
    else:
        weights, bias = _logistic_gd(data, config, weights, bias)
    return LinearModel(weights=weights, bias=float(bias), norm_regime=regime)


# ============================================================================
# Minimum-norm margin oracle
# ============================================================================

@dataclass(frozen=True, eq=False)
class MarginCertificate:
    """A margin-realizing weight vector with its recomputed margin and norms."""

    weights: np.ndarray
    achieved_min_margin: float
    l1_norm: float
    l2_norm: float

    @classmethod
    def from_weights(cls, weights: np.ndarray, data: Dataset) -> 'MarginCertificate':
        margins = data.labels * (data.features @ weights)
        return cls(
            weights=np.asarray(weights, dtype=float),
            achieved_min_margin=float(margins.min()),
            l1_norm=float(np.abs(weights).sum()),
            l2_norm=float(np.linalg.norm(weights)),
        )


ORACLE_CONFIG = TrainConfig(max_epochs=2000, batch_size=None, tolerance=1e-9, patience=50)


def min_norm_margin_solver(
    data: Dataset,
    norm: Literal['l1', 'l2'] = 'l2',
    B_max: float = 1e4,
    iterations: int = 12,
    feasibility: float = 1e-4,
    config: TrainConfig = ORACLE_CONFIG,
) -> MarginCertificate:
    """
    Smallest-norm w with y_i <w, x_i> >= 1 for all i.

    Brackets the radius by doubling from 1, then bisects `iterations` times; a
    radius is feasible when the constrained hinge trainer reaches mean hinge loss
    <= feasibility with every margin positive. The feasible weights are rescaled
    by the realized minimum margin so the certificate has margin exactly 1.

    Raises:
        DataError: "not margin-separable within budget" when B_max is infeasible
    """
    data.require_nonempty()
    if norm not in ('l1', 'l2'):
        raise ConfigError(f"norm must be 'l1' or 'l2', got {norm}")
    ball = NormRegime.l1_ball if norm == 'l1' else NormRegime.l2_ball

    def attempt(B: float) -> Optional[np.ndarray]:
        model = train_constrained_hinge(data, config.with_regime(ball(B)))
        margins = data.labels * (data.features @ model.weights)
        if np.mean(np.maximum(0.0, 1.0 - margins)) <= feasibility and margins.min() > 0:
            return model.weights
        return None

    low, high, best = 0.0, None, None
    radius = 1.0
    while radius <= B_max:
        best = attempt(radius)
        if best is not None:
            high = radius
            break
        low = radius
        radius *= 2
    if high is None:
        raise DataError("not margin-separable within budget")

    for _ in range(iterations):
        middle = 0.5 * (low + high)
        weights = attempt(middle)
        if weights is None:
            low = middle
        else:
            high, best = middle, weights

    margins = data.labels * (data.features @ best)
    if margins.min() < 1:
        best = best / margins.min()
    certificate = MarginCertificate.from_weights(best, data)
    logger.info(f"Min-norm {norm} certificate: l1={certificate.l1_norm:.4g}, "
                f"l2={certificate.l2_norm:.4g}, margin={certificate.achieved_min_margin:.6g}")
    return certificate
