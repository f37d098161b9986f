"""
Core rules-first classification module.

This module defines the domain shared by every other module:
1. Example / Dataset - labeled sparse feature vectors (CSR-backed)
2. RuleSet - ordered single-feature rules with coverage bookkeeping
3. LinearModel - weight vector + bias under a declared norm regime
4. RulesFirstModel - rules take precedence, linear classifier otherwise

It also provides the four losses (mis-classification, margin, hinge, ramp),
prediction semantics, and the dataset / model file formats.

Prediction convention everywhere: sign(0) = -1.
"""

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Literal, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

NORM_SLACK = 1e-9
FORMAT_VERSION = 1


class RulesFirstError(ValueError):
    """Base class for errors raised by this package."""


class ConfigError(RulesFirstError):
    """Invalid configuration or parameter value."""


class DataError(RulesFirstError):
    """Malformed, empty or unreadable data."""


# ============================================================================
# Losses
# ============================================================================

def _products(score, label) -> np.ndarray:
    return np.asarray(score, dtype=float) * np.asarray(label, dtype=float)


def _finish(values: np.ndarray):
    values = np.asarray(values, dtype=float)
    return float(values) if values.ndim == 0 else values


def loss_mis(score, label):
    """Zero-one loss: 1 iff score * label <= 0."""
    return _finish(np.where(_products(score, label) <= 0, 1.0, 0.0))


def loss_margin(score, label):
    """Margin loss: 1 iff score * label < 1 (a product of exactly 1 meets the margin)."""
    return _finish(np.where(_products(score, label) < 1, 1.0, 0.0))


def loss_hinge(score, label):
    """Hinge loss max(0, 1 - score * label)."""
    return _finish(np.maximum(0.0, 1.0 - _products(score, label)))


def loss_ramp(score, label):
    """Ramp loss clamp(1 - score * label, 0, 1)."""
    return _finish(np.clip(1.0 - _products(score, label), 0.0, 1.0))


LOSSES = {
    'mis': loss_mis,
    'margin': loss_margin,
    'hinge': loss_hinge,
    'ramp': loss_ramp,
}


def get_loss(name: str):
    """Look up a loss function by name."""
    if name not in LOSSES:
        raise ConfigError(f"Unknown loss: {name}. Valid losses: {', '.join(LOSSES)}")
    return LOSSES[name]


def sign(values) -> np.ndarray:
    """Elementwise sign with sign(0) = -1."""
    return np.where(np.asarray(values, dtype=float) > 0, 1, -1)


# ============================================================================
# Norm regimes
# ============================================================================

class NormKind(str, Enum):
    L2_BALL = 'l2_ball'
    L1_BALL = 'l1_ball'
    L2_PENALTY = 'l2_penalty'
    L1_PENALTY = 'l1_penalty'


class NormRegime(BaseModel):
    """A norm constraint (ball of radius B) or penalty (inverse strength C)."""

    model_config = ConfigDict(frozen=True)

    kind: NormKind
    value: float = Field(..., gt=0, description="Ball radius B, or C for penalty regimes")

    @classmethod
    def l2_ball(cls, B: float) -> 'NormRegime':
        return cls(kind=NormKind.L2_BALL, value=B)

    @classmethod
    def l1_ball(cls, B: float) -> 'NormRegime':
        return cls(kind=NormKind.L1_BALL, value=B)

    @classmethod
    def l2_penalty(cls, C: float) -> 'NormRegime':
        return cls(kind=NormKind.L2_PENALTY, value=C)

    @classmethod
    def l1_penalty(cls, C: float) -> 'NormRegime':
        return cls(kind=NormKind.L1_PENALTY, value=C)

    @property
    def is_ball(self) -> bool:
        return self.kind in (NormKind.L2_BALL, NormKind.L1_BALL)

    @property
    def is_l1(self) -> bool:
        return self.kind in (NormKind.L1_BALL, NormKind.L1_PENALTY)

    def norm(self, weights: np.ndarray) -> float:
        """The norm this regime measures (l1 or l2)."""
        return float(np.linalg.norm(weights, ord=1 if self.is_l1 else 2))

    def __str__(self) -> str:
        return f"{self.kind.name}({self.value:g})"


# ============================================================================
# Examples and datasets
# ============================================================================

@dataclass(frozen=True)
class Example:
    """A sparse feature vector (index -> value) with a label in {-1, +1}."""

    features: Mapping[int, float]
    label: int

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise DataError(f"Label must be -1 or +1, got {self.label}")
        cleaned = {}
        for index, value in sorted(self.features.items()):
            if int(index) < 0:
                raise DataError(f"Negative feature index {index}")
            if not math.isfinite(value):
                raise DataError(f"Non-finite value at feature {index}")
            if value != 0:
                cleaned[int(index)] = float(value)
        object.__setattr__(self, 'features', cleaned)
        object.__setattr__(self, 'label', int(self.label))

    def value(self, index: int) -> float:
        return self.features.get(index, 0.0)


class Dataset:
    """
    Labeled examples of dimension d, stored as a CSR matrix (one row per example).

    Treated as immutable: every transformation returns a new Dataset.
    """

    def __init__(self, features, labels, dimension: Optional[int] = None):
        matrix = sp.csr_matrix(features, dtype=float, copy=True)
        labels = np.asarray(labels, dtype=float).ravel()

        if matrix.shape[0] != labels.shape[0]:
            raise DataError(
                f"Feature rows ({matrix.shape[0]}) and labels ({labels.shape[0]}) differ"
            )
        if labels.size and not np.all(np.isin(labels, (-1.0, 1.0))):
            raise DataError("Labels must be exactly -1 or +1")
        if not np.all(np.isfinite(matrix.data)):
            raise DataError("Feature values must be finite")

        if dimension is None:
            dimension = matrix.shape[1]
        dimension = int(dimension)
        if dimension < 1:
            raise DataError(f"Dimension must be positive, got {dimension}")
        if matrix.shape[1] > dimension:
            raise DataError(
                f"Examples use {matrix.shape[1]} features but dimension is {dimension}"
            )
        if matrix.shape[1] < dimension:
            matrix.resize((matrix.shape[0], dimension))

        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()

        labels = labels.astype(int)
        labels.setflags(write=False)
        self._features = matrix
        self._labels = labels
        self._dimension = dimension

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_examples(cls, examples: Iterable[Example], dimension: int) -> 'Dataset':
        examples = list(examples)
        rows, cols, vals = [], [], []
        for row, example in enumerate(examples):
            for index, value in example.features.items():
                if index >= dimension:
                    raise DataError(f"Feature index {index} outside dimension {dimension}")
                rows.append(row)
                cols.append(index)
                vals.append(value)
        matrix = sp.csr_matrix((vals, (rows, cols)), shape=(len(examples), dimension))
        return cls(matrix, [e.label for e in examples], dimension)

    @classmethod
    def from_dense(cls, features, labels) -> 'Dataset':
        features = np.atleast_2d(np.asarray(features, dtype=float))
        return cls(features, labels, features.shape[1])

    @classmethod
    def empty(cls, dimension: int) -> 'Dataset':
        return cls(sp.csr_matrix((0, dimension)), np.zeros(0), dimension)

    # ------------------------------------------------------------------
    # Accessors
    # ------------------------------------------------------------------

    @property
    def features(self) -> sp.csr_matrix:
        return self._features

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def dimension(self) -> int:
        return self._dimension

    def __len__(self) -> int:
        return self._labels.shape[0]

    def example(self, i: int) -> Example:
        start, end = self._features.indptr[i], self._features.indptr[i + 1]
        features = dict(zip(self._features.indices[start:end].tolist(),
                            self._features.data[start:end].tolist()))
        return Example(features, int(self._labels[i]))

    @property
    def examples(self) -> List[Example]:
        return [self.example(i) for i in range(len(self))]

    def __iter__(self) -> Iterator[Example]:
        return (self.example(i) for i in range(len(self)))

    @cached_property
    def positive_columns(self) -> sp.csc_matrix:
        """Boolean (m x d) matrix of x(j) > 0, column-major for per-feature scans."""
        return (self._features > 0).tocsc()

    def fires(self, feature_index: int) -> np.ndarray:
        """Boolean mask of examples with x(feature_index) > 0."""
        column = self.positive_columns[:, feature_index]
        return column.toarray().ravel()

    def is_binary(self) -> bool:
        """True when every stored feature value is exactly 1."""
        return bool(np.all(self._features.data == 1.0))

    def require_nonempty(self) -> None:
        if len(self) == 0:
            raise DataError("empty dataset")

    # ------------------------------------------------------------------
    # Transformations
    # ------------------------------------------------------------------

    def subset(self, indices) -> 'Dataset':
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.flatnonzero(indices)
        return Dataset(self._features[indices], self._labels[indices], self._dimension)

    def with_zeroed_columns(self, columns: Iterable[int]) -> 'Dataset':
        """Copy with the given feature columns set to zero (dimension unchanged)."""
        keep = np.ones(self._dimension)
        keep[list(columns)] = 0.0
        return Dataset(self._features @ sp.diags(keep), self._labels, self._dimension)

    def concat(self, other: 'Dataset') -> 'Dataset':
        if other.dimension != self._dimension:
            raise DataError(f"Dimension mismatch: {self._dimension} vs {other.dimension}")
        return Dataset(
            sp.vstack([self._features, other.features], format='csr'),
            np.concatenate([self._labels, other.labels]),
            self._dimension,
        )

    def split(self, fraction: float, seed: int) -> Tuple['Dataset', 'Dataset']:
        """Seeded shuffle, then the first `fraction` of examples vs the rest."""
        if not 0 < fraction < 1:
            raise ConfigError(f"Split fraction must be in (0, 1), got {fraction}")
        order = np.random.default_rng(seed).permutation(len(self))
        cut = int(round(fraction * len(self)))
        return self.subset(np.sort(order[:cut])), self.subset(np.sort(order[cut:]))

    def __repr__(self) -> str:
        return f"Dataset(m={len(self)}, d={self._dimension})"


# ============================================================================
# Rules and models
# ============================================================================

class Rule(NamedTuple):
    """A single-feature rule: fires on x(feature_index) > 0 and returns fired_label."""

    feature_index: int
    fired_label: int
    coverage: int = 0


@dataclass(frozen=True)
class RuleSet:
    """Ordered rules; the first rule that fires decides the prediction."""

    rules: Tuple[Rule, ...] = ()

    def __post_init__(self):
        rules = tuple(Rule(int(r[0]), int(r[1]), int(r[2]) if len(r) > 2 else 0) for r in self.rules)
        seen = set()
        for rule in rules:
            if rule.fired_label not in (-1, 1):
                raise ConfigError(f"Rule label must be -1 or +1, got {rule.fired_label}")
            if rule.feature_index < 0:
                raise ConfigError(f"Negative rule feature index {rule.feature_index}")
            if rule.feature_index in seen:
                raise ConfigError(f"Duplicate rule feature index {rule.feature_index}")
            seen.add(rule.feature_index)
        object.__setattr__(self, 'rules', rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    @property
    def feature_indices(self) -> Tuple[int, ...]:
        return tuple(rule.feature_index for rule in self.rules)

    def with_rule(self, rule: Rule) -> 'RuleSet':
        return RuleSet(self.rules + (Rule(*rule),))

    def first_firing(self, features: Mapping[int, float]) -> Optional[Rule]:
        for rule in self.rules:
            if features.get(rule.feature_index, 0.0) > 0:
                return rule
        return None

    def first_firing_batch(self, data: Dataset) -> np.ndarray:
        """Position of the first firing rule per example, -1 where none fires."""
        if not self.rules:
            return np.full(len(data), -1, dtype=int)
        firing = data.positive_columns[:, list(self.feature_indices)].toarray()
        first = np.argmax(firing, axis=1)
        return np.where(firing.any(axis=1), first, -1)

    def covered(self, data: Dataset) -> np.ndarray:
        """Boolean mask of examples on which at least one rule fires."""
        return self.first_firing_batch(data) >= 0


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Linear classifier score = margin_scale * (<weights, x> + bias)."""

    weights: np.ndarray
    norm_regime: NormRegime
    bias: float = 0.0
    margin_scale: float = 1.0

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float).ravel()
        if not np.all(np.isfinite(weights)) or not math.isfinite(self.bias):
            raise ConfigError("Linear model parameters must be finite")
        if not self.margin_scale > 0:
            raise ConfigError(f"margin_scale must be positive, got {self.margin_scale}")
        if self.norm_regime.is_ball:
            norm = self.norm_regime.norm(weights)
            if norm > self.norm_regime.value * (1 + NORM_SLACK):
                raise ConfigError(
                    f"Weights violate {self.norm_regime}: norm {norm:.6g}"
                )
        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'bias', float(self.bias))
        object.__setattr__(self, 'margin_scale', float(self.margin_scale))

    @classmethod
    def zeros(cls, dimension: int, norm_regime: NormRegime) -> 'LinearModel':
        return cls(weights=np.zeros(dimension), norm_regime=norm_regime)

    @property
    def dimension(self) -> int:
        return self.weights.shape[0]

    def score(self, features: Mapping[int, float]) -> float:
        total = sum(self.weights[j] * v for j, v in features.items())
        return self.margin_scale * (total + self.bias)

    def scores(self, data: Dataset) -> np.ndarray:
        _check_dimension(self.dimension, data)
        return self.margin_scale * (data.features @ self.weights + self.bias)

    def predict_labels(self, data: Dataset) -> np.ndarray:
        return sign(self.scores(data))


@dataclass(frozen=True, eq=False)
class RulesFirstModel:
    """Rules are scanned in order; the linear model decides when none fires."""

    rule_set: RuleSet
    linear: LinearModel

    def __post_init__(self):
        for rule in self.rule_set:
            if rule.feature_index >= self.linear.dimension:
                raise ConfigError(
                    f"Rule feature {rule.feature_index} outside dimension {self.linear.dimension}"
                )

    @property
    def dimension(self) -> int:
        return self.linear.dimension

    def scores(self, data: Dataset) -> np.ndarray:
        """Linear scores, with rule-fired rows replaced by fired_label * inf."""
        scores = self.linear.scores(data)
        first = self.rule_set.first_firing_batch(data)
        fired = first >= 0
        if fired.any():
            labels = np.array([rule.fired_label for rule in self.rule_set], dtype=float)
            scores = scores.copy()
            scores[fired] = labels[first[fired]] * np.inf
        return scores

    def predict_batch(self, data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
        """Labels and attributions (firing rule's feature index, -1 for the linear part)."""
        labels = self.linear.predict_labels(data)
        first = self.rule_set.first_firing_batch(data)
        attribution = np.full(len(data), -1, dtype=int)
        fired = first >= 0
        if fired.any():
            rule_labels = np.array([r.fired_label for r in self.rule_set], dtype=int)
            rule_features = np.array(self.rule_set.feature_indices, dtype=int)
            labels = labels.copy()
            labels[fired] = rule_labels[first[fired]]
            attribution[fired] = rule_features[first[fired]]
        return labels, attribution

    def predict_labels(self, data: Dataset) -> np.ndarray:
        return self.predict_batch(data)[0]


Model = Union[LinearModel, RulesFirstModel]


def _check_dimension(dimension: int, data: Dataset) -> None:
    if data.dimension != dimension:
        raise DataError(f"Model dimension {dimension} does not match data dimension {data.dimension}")


def _as_features(x) -> Mapping[int, float]:
    if isinstance(x, Example):
        return x.features
    return x


# ============================================================================
# Prediction and evaluation
# ============================================================================

def predict(model: Model, x) -> Tuple[int, Optional[int]]:
    """
    Predict a single sparse vector.

    Args:
        model: RulesFirstModel (or a bare LinearModel)
        x: Example or mapping feature index -> value

    Returns:
        Tuple of (label, attribution) where attribution is the feature index of
        the first firing rule, or None when the linear part decided.
    """
    features = _as_features(x)
    for index in features:
        if index < 0 or index >= model.dimension:
            raise DataError(f"Feature index {index} outside dimension {model.dimension}")
    if isinstance(model, RulesFirstModel):
        rule = model.rule_set.first_firing(features)
        if rule is not None:
            return rule.fired_label, rule.feature_index
        linear = model.linear
    else:
        linear = model
    return (1 if linear.score(features) > 0 else -1), None


def predict_batch(model: Model, data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized predict over a dataset; attribution is -1 where no rule fired."""
    if isinstance(model, RulesFirstModel):
        return model.predict_batch(data)
    return model.predict_labels(data), np.full(len(data), -1, dtype=int)


def decision_scores(model, data: Dataset) -> np.ndarray:
    return model.scores(data)


def empirical_loss(model, data: Dataset, loss: str = 'mis') -> float:
    """Mean of the selected loss over the dataset (rule-fired rows score +-inf)."""
    data.require_nonempty()
    values = get_loss(loss)(model.scores(data), data.labels)
    return float(np.mean(values))


def error_rate(model, data: Dataset) -> float:
    """Fraction of examples whose predicted label differs from the true label."""
    data.require_nonempty()
    return float(np.mean(model.predict_labels(data) != data.labels))


def accuracy(model, data: Dataset) -> float:
    return 1.0 - error_rate(model, data)


# ============================================================================
# Dataset files
# ============================================================================

def write_dense_csv(data: Dataset, filepath: Union[str, Path]) -> None:
    """Dense CSV with header f0,...,f{d-1},label."""
    columns = [f'f{j}' for j in range(data.dimension)]
    df = pd.DataFrame(data.features.toarray(), columns=columns)
    df['label'] = data.labels
    df.to_csv(filepath, index=False)


def read_dense_csv(filepath: Union[str, Path]) -> Dataset:
    try:
        df = pd.read_csv(filepath)
    except Exception as e:
        raise DataError(f"Error loading data from {filepath}: {str(e)}")

    if len(df.columns) < 2 or df.columns[-1] != 'label':
        raise DataError(f"{filepath}: last column must be 'label'")
    expected = [f'f{j}' for j in range(len(df.columns) - 1)]
    if list(df.columns[:-1]) != expected:
        raise DataError(f"{filepath}: feature columns must be named f0..f{len(expected) - 1}")

    values = df.apply(pd.to_numeric, errors='coerce')
    if values.isna().any().any():
        row = int(values.isna().any(axis=1).to_numpy().argmax())
        raise DataError(f"{filepath}: invalid number on data row {row + 1}")
    return Dataset.from_dense(values.iloc[:, :-1].to_numpy(), values['label'].to_numpy())


def write_sparse_text(data: Dataset, filepath: Union[str, Path]) -> None:
    """One example per line: `label idx:val ...`, preceded by a `# dimension=d` header."""
    matrix = data.features
    with open(filepath, 'w', encoding='utf-8') as handle:
        handle.write(f'# dimension={data.dimension}\n')
        for i, label in enumerate(data.labels):
            start, end = matrix.indptr[i], matrix.indptr[i + 1]
            pairs = ' '.join(
                f'{j}:{repr(float(v))}'
                for j, v in zip(matrix.indices[start:end], matrix.data[start:end])
            )
            handle.write(f'{int(label):+d} {pairs}'.rstrip() + '\n')


def read_sparse_text(filepath: Union[str, Path], dimension: Optional[int] = None) -> Dataset:
    rows, cols, vals, labels = [], [], [], []
    header_dimension = None
    try:
        with open(filepath, 'r', encoding='utf-8') as handle:
            lines = handle.readlines()
    except OSError as e:
        raise DataError(f"Error loading data from {filepath}: {str(e)}")

    for line_number, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith('#'):
            if line[1:].strip().startswith('dimension='):
                try:
                    header_dimension = int(line.split('=', 1)[1])
                except ValueError:
                    header_dimension = 0
                if header_dimension < 1:
                    raise DataError(f"{filepath}, line {line_number}: malformed header '{line}'")
            continue
        parts = line.split()
        try:
            label = int(float(parts[0]))
            if label not in (-1, 1):
                raise ValueError(f"label {parts[0]} is not -1 or +1")
            previous = -1
            for token in parts[1:]:
                index_text, value_text = token.split(':', 1)
                index, value = int(index_text), float(value_text)
                if index <= previous:
                    raise ValueError("indices must be strictly ascending")
                if not math.isfinite(value):
                    raise ValueError(f"non-finite value at index {index}")
                previous = index
                rows.append(len(labels))
                cols.append(index)
                vals.append(value)
        except ValueError as e:
            raise DataError(f"{filepath}, line {line_number}: {str(e)}")
        labels.append(label)

    inferred = (max(cols) + 1) if cols else 1
    dimension = dimension or header_dimension or inferred
    if inferred > dimension:
        raise DataError(f"{filepath}: feature index {inferred - 1} outside dimension {dimension}")
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), dimension))
    return Dataset(matrix, labels, dimension)


def read_dataset(filepath: Union[str, Path], dimension: Optional[int] = None) -> Dataset:
    """Load a dataset; `.csv` is dense CSV, anything else the sparse text format."""
    if str(filepath).lower().endswith('.csv'):
        return read_dense_csv(filepath)
    return read_sparse_text(filepath, dimension)


def write_dataset(data: Dataset, filepath: Union[str, Path]) -> None:
    if str(filepath).lower().endswith('.csv'):
        write_dense_csv(data, filepath)
    else:
        write_sparse_text(data, filepath)


# ============================================================================
# Model documents
# ============================================================================

class LinearDocument(BaseModel):
    kind: Literal['linear'] = 'linear'
    norm_regime: NormRegime
    bias: float
    margin_scale: float = 1.0
    weights: List[float]


class RuleDocument(BaseModel):
    feature_index: int
    fired_label: int
    coverage: int = 0


class RulesFirstDocument(BaseModel):
    kind: Literal['rules_first'] = 'rules_first'
    rules: List[RuleDocument]
    linear: LinearDocument


def linear_to_document(model: LinearModel) -> LinearDocument:
    return LinearDocument(
        norm_regime=model.norm_regime,
        bias=model.bias,
        margin_scale=model.margin_scale,
        weights=model.weights.tolist(),
    )


def linear_from_document(doc: LinearDocument) -> LinearModel:
    return LinearModel(
        weights=np.array(doc.weights, dtype=float),
        norm_regime=doc.norm_regime,
        bias=doc.bias,
        margin_scale=doc.margin_scale,
    )


def rules_first_to_document(model: RulesFirstModel) -> RulesFirstDocument:
    return RulesFirstDocument(
        rules=[RuleDocument(**rule._asdict()) for rule in model.rule_set],
        linear=linear_to_document(model.linear),
    )


def rules_first_from_document(doc: RulesFirstDocument) -> RulesFirstModel:
    rules = RuleSet(tuple(Rule(r.feature_index, r.fired_label, r.coverage) for r in doc.rules))
    return RulesFirstModel(rule_set=rules, linear=linear_from_document(doc.linear))


def model_to_dict(model) -> Dict:
    """Structured document for any model kind, wrapped with the format version."""
    if isinstance(model, LinearModel):
        body = linear_to_document(model)
    elif isinstance(model, RulesFirstModel):
        body = rules_first_to_document(model)
    else:
        from boost_rule import BoostedModel, boosted_to_document
        if not isinstance(model, BoostedModel):
            raise ConfigError(f"Cannot serialize model of type {type(model).__name__}")
        body = boosted_to_document(model)
    return {'format_version': FORMAT_VERSION, 'model': body.model_dump(mode='json')}


def model_from_dict(document: Dict):
    if document.get('format_version') != FORMAT_VERSION:
        raise DataError(f"Unsupported model format version: {document.get('format_version')}")
    body = document.get('model') or {}
    kind = body.get('kind')
    if kind == 'linear':
        return linear_from_document(LinearDocument.model_validate(body))
    if kind == 'rules_first':
        return rules_first_from_document(RulesFirstDocument.model_validate(body))
    if kind == 'boosted':
        from boost_rule import BoostedDocument, boosted_from_document
        return boosted_from_document(BoostedDocument.model_validate(body))
    raise DataError(f"Unknown model kind: {kind}")


def save_model(model, filepath: Union[str, Path]) -> None:
    with open(filepath, 'w', encoding='utf-8') as handle:
        json.dump(model_to_dict(model), handle, indent=2)
    logger.info(f"Saved {type(model).__name__} to {filepath}")


def load_model(filepath: Union[str, Path]):
    try:
        with open(filepath, 'r', encoding='utf-8') as handle:
            document = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"Error loading model from {filepath}: {str(e)}")
    try:
        return model_from_dict(document)
    except RulesFirstError:
        raise
    except ValueError as e:
        raise DataError(f"Invalid model document {filepath}: {str(e)}")
