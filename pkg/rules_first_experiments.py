"""
Experiment orchestrator for rules-first learners.

Provides a high-level interface for fitting the registered methods on synthetic
and text data, running the learning-curve, rule-budget, threshold and sample-size
sweeps, and exporting the results as versioned CSV files with a manifest.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from boost_rule import BoostedModel, boost_rule
from datagen import SyntheticSpec, gen_synthetic, table1_family
from greedy_rules import (
    GreedyConfig,
    NearRuleConfig,
    fit_rules_first_logistic,
    greedy_eval_loss,
    greedy_rule,
    rank_rule_candidates,
    select_near_rules,
)
from linear_trainers import TrainConfig, train_convex_relaxation, train_penalized_logistic
from rules_first_core import (
    ConfigError,
    Dataset,
    NormRegime,
    RuleSet,
    RulesFirstError,
    RulesFirstModel,
    accuracy,
    empirical_loss,
    error_rate,
    load_model,
    predict_batch,
    read_dataset,
    save_model,
)
from text_features import build_vocab, get_normalizer, read_corpus, split_corpus, vectorize

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

RECORD_COLUMNS = [
    'row_type', 'method', 'm', 'k', 'B', 'budget', 'C', 'threshold', 'trial', 'seed',
    'n_candidates', 'n_rules', 'train_accuracy', 'eval_accuracy', 'test_accuracy',
    'test_accuracy_sem', 'rules',
]
SAMPLE_SIZE_COLUMNS = [
    'row_type', 'method', 'k', 'B', 'trial', 'seed', 'epsilon', 'm_reached', 'n_reached', 'status',
]
INTEGER_COLUMNS = ['m', 'k', 'budget', 'trial', 'seed', 'n_candidates', 'n_rules', 'n_reached']

# Independent random streams per (trial, ...) cell
TRAIN_STREAM, TEST_STREAM, SPLIT_STREAM, FIT_STREAM = range(4)


def derive_seed(*keys: int) -> int:
    """Deterministic 32-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(key) for key in keys]).generate_state(1)[0])


class HarnessConfig(BaseModel):
    """Every setting of the experiment harness; the CLI config file mirrors these fields."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    seed: int = Field(0, ge=0)
    trials: int = Field(20, ge=1)
    methods: Optional[Tuple[str, ...]] = None
    m: int = Field(1500, ge=3)
    m_grid: Tuple[int, ...] = (300, 600, 1200, 2400)
    test_size: int = Field(2000, ge=1)
    k: int = Field(20, ge=1)
    B: float = Field(5.0, gt=0)
    C: float = Field(1.0, gt=0)
    B1: float = Field(1.0, gt=0, description="l1 radius of the convex-relaxation part")
    b1_grid: Tuple[float, ...] = (0.5, 2.0, 8.0)
    budget: int = Field(20, ge=0)
    kappa_grid: Tuple[int, ...] = tuple(range(31))
    kappa_method: Literal['greedy_l2', 'greedy_l1'] = 'greedy_l2'
    candidate_limit: Optional[int] = Field(None, ge=1)
    candidate_purity: float = Field(
        1.0, ge=0.5, le=1.0, description="Least majority share of a synthetic rule candidate"
    )
    early_stop: bool = Field(False, description="Stop adding rules once none lowers the evaluation error")
    coverage_constant: float = Field(100.0, gt=0)
    rounds: int = Field(20, ge=1)
    solver: Literal['gd', 'lbfgs'] = 'lbfgs'
    max_epochs: int = Field(200, ge=1)
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)
    corpus: str = 'data/sentiment_mini.tsv'
    normalizer: str = 'strip_suffixes'
    thresholds: Tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)
    split_fractions: Tuple[float, float, float] = (0.5, 0.2, 0.3)
    near_rules: NearRuleConfig = Field(default_factory=NearRuleConfig)
    k_grid: Tuple[int, ...] = (5,)
    B_grid: Tuple[int, ...] = (2, 4)
    epsilon: float = Field(0.1, gt=0, lt=1)
    m_min: int = Field(20, ge=3)
    m_max: int = Field(20000, ge=3)
    jobs: int = Field(1, ge=1)

    @property
    def candidate_pool(self) -> int:
        return self.candidate_limit or self.budget + 10


class ExperimentRecord(BaseModel):
    """One fitted model measured on train / evaluation / test data."""

    method: str
    m: Optional[int] = None
    k: Optional[int] = None
    B: Optional[float] = None
    budget: Optional[int] = None
    C: Optional[float] = None
    threshold: Optional[float] = None
    trial: int = 0
    seed: int = 0
    n_candidates: Optional[int] = None
    n_rules: int = 0
    train_accuracy: Optional[float] = Field(None, ge=0, le=1)
    eval_accuracy: Optional[float] = Field(None, ge=0, le=1)
    test_accuracy: float = Field(..., ge=0, le=1)
    rules: str = ''
    wall_time: float = 0.0


class SampleSizeRecord(BaseModel):
    """Smallest training size reaching test error <= epsilon, or None when unreached."""

    method: str
    k: int
    B: int
    trial: int
    seed: int
    epsilon: float
    m_reached: Optional[int] = None
    wall_time: float = 0.0


# ============================================================================
# Methods
# ============================================================================

def _penalty_config(config: HarnessConfig, l1: bool) -> TrainConfig:
    regime = NormRegime.l1_penalty(config.C) if l1 else NormRegime.l2_penalty(config.C)
    return TrainConfig(norm_regime=regime, solver=config.solver, max_epochs=config.max_epochs)


def _greedy_config(config: HarnessConfig) -> GreedyConfig:
    return GreedyConfig(
        k=config.k,
        B=config.B,
        coverage_constant=config.coverage_constant,
        train=TrainConfig(norm_regime=NormRegime.l2_ball(config.B), max_epochs=config.max_epochs),
    )


def fit_l2(train, config, seed, eval=None, candidates=None):
    return train_penalized_logistic(train, _penalty_config(config, l1=False))


def fit_l1(train, config, seed, eval=None, candidates=None):
    return train_penalized_logistic(train, _penalty_config(config, l1=True))


def _fit_greedy(train, config, seed, eval, candidates, l1):
    if eval is None:
        part, eval = train.split(2 / 3, seed)
    else:
        part = train
    if candidates is None:
        candidates = rank_rule_candidates(part, limit=config.candidate_pool, min_purity=config.candidate_purity)
    result = greedy_eval_loss(part, eval, candidates, config.budget, _penalty_config(config, l1),
                              refit=train, early_stop=config.early_stop)
    return result.model


def fit_greedy_l2(train, config, seed, eval=None, candidates=None):
    return _fit_greedy(train, config, seed, eval, candidates, l1=False)


def fit_greedy_l1(train, config, seed, eval=None, candidates=None):
    return _fit_greedy(train, config, seed, eval, candidates, l1=True)


def fit_greedy_rule(train, config, seed, eval=None, candidates=None):
    return greedy_rule(train, _greedy_config(config))


def fit_boost_rule(train, config, seed, eval=None, candidates=None):
    return boost_rule(train, _greedy_config(config), config.rounds, seed)


def fit_convex_relaxation(train, config, seed, eval=None, candidates=None):
    train_cfg = TrainConfig(max_epochs=config.max_epochs, seed=seed)
    return train_convex_relaxation(train, config.B, config.B1, train_cfg)


METHODS = {
    'l2': {
        'name': 'L2 Logistic',
        'description': 'Logistic regression with an l2 penalty (1/C) ||w||^2 / 2',
        'func': fit_l2
    },
    'l1': {
        'name': 'L1 Logistic',
        'description': 'Logistic regression with an l1 penalty (1/C) ||w||_1',
        'func': fit_l1
    },
    'greedy_l2': {
        'name': 'Greedy Rules + L2',
        'description': 'Rules chosen by evaluation loss, l2-penalized logistic on the rest',
        'func': fit_greedy_l2
    },
    'greedy_l1': {
        'name': 'Greedy Rules + L1',
        'description': 'Rules chosen by evaluation loss, l1-penalized logistic on the rest',
        'func': fit_greedy_l1
    },
    'greedy_rule': {
        'name': 'GreedyRule',
        'description': 'High-coverage perfect rules, then hinge loss under ||w||_2 <= B',
        'func': fit_greedy_rule
    },
    'boost_rule': {
        'name': 'BoostRule',
        'description': 'AdaBoost with GreedyRule as the weak learner',
        'func': fit_boost_rule
    },
    'convex_relaxation': {
        'name': 'Convex Relaxation',
        'description': 'Hinge loss over w_a + w_b with ||w_a||_2 <= B and ||w_b||_1 <= B1',
        'func': fit_convex_relaxation
    },
}

DEFAULT_METHODS = {
    'curve': ('l2', 'greedy_l2'),
    'threshold': ('l2', 'greedy_l2'),
    'table1': ('greedy_rule', 'convex_relaxation'),
}
TEXT_METHODS = ('l2', 'l1', 'greedy_l2', 'greedy_l1')


def check_methods(methods: Sequence[str], allowed: Sequence[str] = tuple(METHODS)) -> Tuple[str, ...]:
    for method in methods:
        if method not in allowed:
            raise ConfigError(f"Unknown method: {method}. Valid methods: {', '.join(allowed)}")
    if not methods:
        raise ConfigError("At least one method is required")
    return tuple(methods)


def fit_method(method: str, train: Dataset, config: HarnessConfig, seed: int,
               eval: Optional[Dataset] = None, candidates=None):
    """Fit a registered method; failures are reported with the method's display name."""
    check_methods([method])
    info = METHODS[method]
    try:
        return info['func'](train, config, seed, eval=eval, candidates=candidates)
    except RulesFirstError:
        raise
    except Exception as e:
        raise ValueError(f"Error running {info['name']}: {str(e)}")


def count_rules(model) -> int:
    if isinstance(model, RulesFirstModel):
        return len(model.rule_set)
    if isinstance(model, BoostedModel):
        return sum(len(stage.rule_set) for stage, _ in model.stages)
    return 0


def describe_rules(model, tokens: Optional[Sequence[str]] = None) -> str:
    """Space-separated `feature:label` list (token names for text data)."""
    if not isinstance(model, RulesFirstModel):
        return ''
    name = (lambda j: tokens[j]) if tokens is not None else str
    return ' '.join(f'{name(r.feature_index)}:{r.fired_label:+d}' for r in model.rule_set)


# ============================================================================
# Cells (module level so a process pool can pickle them)
# ============================================================================

def _synthetic_pair(config: HarnessConfig, trial: int, m: int) -> Tuple[Dataset, Dataset]:
    spec = config.synthetic
    train = gen_synthetic(spec, m, seed=derive_seed(config.seed, trial, m, TRAIN_STREAM))
    test = gen_synthetic(spec, config.test_size, seed=derive_seed(config.seed, trial, TEST_STREAM))
    return train, test


def _curve_cell(task) -> ExperimentRecord:
    method, m, trial, config = task
    train, test = _synthetic_pair(config, trial, m)
    seed = derive_seed(config.seed, trial, m, FIT_STREAM)

    start = time.perf_counter()
    model = fit_method(method, train, config, seed)
    wall_time = time.perf_counter() - start
    return ExperimentRecord(
        method=method, m=m, k=config.synthetic.k, B=config.B,
        budget=config.budget if method.startswith('greedy_') else None,
        C=config.C, trial=trial, seed=seed,
        n_rules=count_rules(model),
        train_accuracy=accuracy(model, train),
        test_accuracy=accuracy(model, test),
        rules=describe_rules(model),
        wall_time=wall_time,
    )


def _kappa_cell(task) -> List[ExperimentRecord]:
    trial, m, grid, config = task
    train, test = _synthetic_pair(config, trial, m)
    seed = derive_seed(config.seed, trial, m, FIT_STREAM)
    train_cfg = _penalty_config(config, l1=config.kappa_method == 'greedy_l1')

    start = time.perf_counter()
    part, eval = train.split(2 / 3, seed)
    largest = max(grid)
    candidates = rank_rule_candidates(part, limit=config.candidate_limit or largest + 10)
    chosen = greedy_eval_loss(part, eval, candidates, largest, train_cfg, early_stop=False).rule_set
    search_time = time.perf_counter() - start

    records = []
    for budget in sorted(grid):
        start = time.perf_counter()
        model = fit_rules_first_logistic(RuleSet(chosen.rules[:budget]), train, train_cfg)
        records.append(ExperimentRecord(
            method=config.kappa_method, m=m, k=config.synthetic.k, budget=budget, C=config.C,
            trial=trial, seed=seed,
            n_rules=count_rules(model),
            train_accuracy=accuracy(model, train),
            eval_accuracy=accuracy(model, eval),
            test_accuracy=accuracy(model, test),
            rules=describe_rules(model),
            wall_time=search_time + time.perf_counter() - start,
        ))
    return records


def _table1_cell(task) -> SampleSizeRecord:
    method, k, B, trial, config = task
    # one draw per (trial, k): every B sees the same rule firings and uncovered examples
    spec = table1_family(k, B, seed=derive_seed(config.seed, trial, k, TRAIN_STREAM))
    pool = gen_synthetic(spec, config.m_max)
    test = gen_synthetic(spec, config.test_size, seed=derive_seed(config.seed, trial, k, TEST_STREAM))
    seed = derive_seed(config.seed, trial, k, FIT_STREAM)
    local = config.model_copy(update={'k': k, 'B': float(B)})
    variants = [local.model_copy(update={'B1': b1}) for b1 in config.b1_grid] \
        if method == 'convex_relaxation' else [local]

    def test_error(m: int) -> float:
        train = pool.subset(np.arange(m))
        return min(error_rate(fit_method(method, train, variant, seed), test) for variant in variants)

    start = time.perf_counter()
    low, high = config.m_min, config.m_max
    if test_error(high) > config.epsilon:
        reached = None
    elif test_error(low) <= config.epsilon:
        reached = low
    else:
        # smallest m with error <= epsilon, to within 2%
        while high - low > max(1, low // 50):
            middle = (low + high) // 2
            if test_error(middle) <= config.epsilon:
                high = middle
            else:
                low = middle
        reached = high
    return SampleSizeRecord(method=method, k=k, B=B, trial=trial, seed=seed, epsilon=config.epsilon,
                            m_reached=reached, wall_time=time.perf_counter() - start)


class ExperimentRunner:
    """Orchestrates fitting and sweeps across the registered methods."""

    METHODS = METHODS

    def __init__(self, config: Optional[HarnessConfig] = None):
        """Initialize the runner."""
        self.config = config or HarnessConfig()
        self.experiment = None
        self.parameters = {}
        self.results = None
        self.timings = None
        self.attributions = None
        self.best_threshold = None

    def _map(self, func: Callable, tasks: List, progress_callback: Optional[Callable] = None) -> List:
        """Run cells in order, or in a process pool when jobs > 1; results keep task order."""
        total = len(tasks)
        if self.config.jobs <= 1 or total <= 1:
            results = []
            for index, task in enumerate(tasks, 1):
                results.append(func(task))
                if progress_callback:
                    progress_callback(self.experiment, index, total)
            return results

        results = []
        with ProcessPoolExecutor(max_workers=self.config.jobs) as pool:
            for index, result in enumerate(pool.map(func, tasks), 1):
                results.append(result)
                if progress_callback:
                    progress_callback(self.experiment, index, total)
        return results

    def _store(self, experiment: str, parameters: Dict, results: pd.DataFrame, timings: pd.DataFrame) -> pd.DataFrame:
        self.experiment = experiment
        self.parameters = parameters
        self.results = results
        self.timings = timings
        return results

    # ------------------------------------------------------------------
    # Sweeps
    # ------------------------------------------------------------------

    def run_learning_curve(
        self,
        spec: SyntheticSpec,
        methods: Sequence[str],
        m_grid: Sequence[int],
        trials: int,
        progress_callback: Optional[Callable] = None
    ) -> pd.DataFrame:
        """
        Test accuracy of each method as a function of the training size m.

        Greedy methods split each sample 2m/3 / m/3 into train and evaluation parts
        and refit on all m; every cell is tested on a fresh 2000-example sample.

        Returns:
            DataFrame of record rows followed by per-(method, m) aggregate rows
        """
        methods = check_methods(methods)
        if trials < 1 or not m_grid:
            raise ConfigError("trials must be positive and m_grid non-empty")
        config = self.config.model_copy(update={'synthetic': spec})
        self.experiment = 'curve'
        tasks = [(method, int(m), trial, config)
                 for method in sorted(methods) for m in sorted(m_grid) for trial in range(trials)]
        records = self._map(_curve_cell, tasks, progress_callback)

        results = _with_aggregates(records, ['method', 'm'])
        timings = pd.DataFrame([r.model_dump(include={'method', 'm', 'trial', 'wall_time'}) for r in records])
        parameters = {'methods': sorted(methods), 'm_grid': sorted(m_grid), 'trials': trials}
        return self._store('curve', parameters, results, timings)

    def run_kappa_sweep(
        self,
        spec: SyntheticSpec,
        kappa_grid: Sequence[int],
        m: int,
        trials: int,
        progress_callback: Optional[Callable] = None
    ) -> pd.DataFrame:
        """
        Accuracy of the evaluation-loss greedy learner as a function of the rule budget.

        One greedy run per trial with the largest budget and no early stop; the
        model for budget b keeps the first b selected rules and is refit on all m.
        """
        if trials < 1 or not kappa_grid or min(kappa_grid) < 0:
            raise ConfigError("trials must be positive and kappa_grid non-empty and non-negative")
        config = self.config.model_copy(update={'synthetic': spec})
        self.experiment = 'kappa'
        grid = tuple(sorted(set(int(b) for b in kappa_grid)))
        tasks = [(trial, int(m), grid, config) for trial in range(trials)]
        records = [r for cell in self._map(_kappa_cell, tasks, progress_callback) for r in cell]
        records.sort(key=lambda r: (r.budget, r.trial))

        results = _with_aggregates(records, ['method', 'budget'])
        timings = pd.DataFrame([r.model_dump(include={'method', 'budget', 'trial', 'wall_time'}) for r in records])
        parameters = {'kappa_grid': list(grid), 'm': int(m), 'trials': trials}
        return self._store('kappa', parameters, results, timings)

    def _corpus_trial(self, docs, trial: int):
        config = self.config
        split = split_corpus(docs, config.split_fractions, derive_seed(config.seed, trial, SPLIT_STREAM))
        normalizer = get_normalizer(config.normalizer)
        vocab = build_vocab([text for text, _ in split[0] + split[1]], normalizer)
        datasets = tuple(vectorize(part, vocab, normalizer) for part in split)
        return split, vocab, datasets

    def _threshold_models(self, datasets, threshold: float, methods: Sequence[str], baselines: Dict):
        train, eval, _ = datasets
        near = select_near_rules(train, self.config.near_rules, threshold)
        candidates = [(rule.feature_index, rule.fired_label) for rule in near]
        models = {}
        for method in methods:
            if method in baselines:
                models[method] = baselines[method]
            else:
                models[method] = fit_method(method, train, self.config, 0, eval=eval, candidates=candidates)
        return len(candidates), models

    def run_threshold_sweep(
        self,
        corpus: Union[str, Path],
        thresholds: Sequence[float],
        methods: Sequence[str],
        trials: int = 1,
        progress_callback: Optional[Callable] = None
    ) -> pd.DataFrame:
        """
        Accuracy per (method, near-rule score threshold) on a labeled text corpus.

        The corpus is split train / evaluation / test; near rules mined on the training
        part feed the evaluation-loss greedy learner. A threshold that leaves no
        candidate reproduces the baseline exactly. The threshold with the best mean
        evaluation accuracy of the first greedy method is kept in `best_threshold`
        and its per-document attributions in `attributions`.
        """
        methods = check_methods(methods, TEXT_METHODS)
        if not thresholds or trials < 1:
            raise ConfigError("thresholds must be non-empty and trials positive")
        self.experiment = 'threshold'
        docs = read_corpus(corpus)
        thresholds = sorted(float(t) for t in thresholds)

        records = []
        step, total = 0, trials * len(thresholds)
        for trial in range(trials):
            split, vocab, datasets = self._corpus_trial(docs, trial)
            train, eval, test = datasets
            baselines = {}
            for method in methods:
                baseline = method.replace('greedy_', '')
                if baseline not in baselines:
                    baselines[baseline] = fit_method(baseline, train, self.config, 0)

            for threshold in thresholds:
                start = time.perf_counter()
                n_candidates, models = self._threshold_models(datasets, threshold, methods, baselines)
                elapsed = time.perf_counter() - start
                for method in sorted(methods):
                    model = models[method]
                    greedy = method.startswith('greedy_')
                    records.append(ExperimentRecord(
                        method=method, C=self.config.C, threshold=threshold, trial=trial,
                        budget=self.config.budget if greedy else None,
                        n_candidates=n_candidates if greedy else None,
                        n_rules=count_rules(model),
                        train_accuracy=accuracy(model, train),
                        eval_accuracy=accuracy(model, eval),
                        test_accuracy=accuracy(model, test),
                        rules=describe_rules(model, vocab.tokens),
                        wall_time=elapsed,
                    ))
                step += 1
                if progress_callback:
                    progress_callback(self.experiment, step, total)

        records.sort(key=lambda r: (r.method, r.threshold, r.trial))
        results = _with_aggregates(records, ['method', 'threshold'])
        timings = pd.DataFrame([r.model_dump(include={'method', 'threshold', 'trial', 'wall_time'})
                                for r in records])
        parameters = {'corpus': str(corpus), 'thresholds': thresholds, 'methods': sorted(methods),
                      'trials': trials}
        self._store('threshold', parameters, results, timings)

        greedy_methods = [m for m in methods if m.startswith('greedy_')]
        if greedy_methods:
            self._select_threshold(docs, greedy_methods[0], methods, thresholds)
        return results

    def _select_threshold(self, docs, greedy_method: str, methods: Sequence[str], thresholds: Sequence[float]) -> None:
        """Pick the best threshold by evaluation accuracy and dump trial-0 attributions."""
        rows = self.results[(self.results['row_type'] == 'record') & (self.results['method'] == greedy_method)]
        means = rows.groupby('threshold', sort=True)['eval_accuracy'].mean()
        self.best_threshold = float(means.idxmax())
        logger.info(f"Best threshold by evaluation accuracy: {self.best_threshold:g}")

        split, vocab, datasets = self._corpus_trial(docs, 0)
        baseline_method = greedy_method.replace('greedy_', '')
        baselines = {baseline_method: fit_method(baseline_method, datasets[0], self.config, 0)}
        _, models = self._threshold_models(datasets, self.best_threshold, [greedy_method, baseline_method], baselines)

        test_docs, test = split[2], datasets[2]
        greedy_labels, attribution = predict_batch(models[greedy_method], test)
        baseline_labels, _ = predict_batch(models[baseline_method], test)
        self.attributions = pd.DataFrame({
            'text': [text for text, _ in test_docs],
            'label': test.labels,
            'greedy_prediction': greedy_labels,
            'baseline_prediction': baseline_labels,
            'rule_token': [vocab.token(j) if j >= 0 else '' for j in attribution],
        })

    def run_table1_comparison(
        self,
        k_grid: Sequence[int],
        B_grid: Sequence[int],
        trials: int,
        methods: Optional[Sequence[str]] = None,
        progress_callback: Optional[Callable] = None
    ) -> pd.DataFrame:
        """
        Smallest training size reaching test error <= epsilon, per (method, k, B).

        Training sets are nested prefixes of one large sample per trial, searched by
        bisection between m_min and m_max; cells that miss epsilon at m_max are
        recorded as UNREACHED. The convex relaxation keeps its best B1 from b1_grid.
        """
        methods = check_methods(methods or DEFAULT_METHODS['table1'])
        if not k_grid or not B_grid or trials < 1:
            raise ConfigError("k_grid and B_grid must be non-empty and trials positive")
        self.experiment = 'table1'
        tasks = [(method, int(k), int(B), trial, self.config)
                 for method in sorted(methods) for k in sorted(k_grid) for B in sorted(B_grid)
                 for trial in range(trials)]
        records = self._map(_table1_cell, tasks, progress_callback)

        rows = [dict(row_type='record', **r.model_dump(exclude={'wall_time'}),
                     n_reached=int(r.m_reached is not None),
                     status='REACHED' if r.m_reached is not None else 'UNREACHED') for r in records]
        frame = pd.DataFrame(rows)
        frame['m_reached'] = pd.to_numeric(frame['m_reached'])
        aggregates = []
        for (method, k, B), group in frame.groupby(['method', 'k', 'B'], sort=True):
            reached = group['m_reached'].dropna()
            aggregates.append({
                'row_type': 'aggregate', 'method': method, 'k': k, 'B': B, 'epsilon': self.config.epsilon,
                'm_reached': float(reached.mean()) if len(reached) else np.nan,
                'n_reached': len(reached),
                'status': 'REACHED' if len(reached) == len(group) else 'UNREACHED',
            })
        results = _typed(pd.concat([frame, pd.DataFrame(aggregates)], ignore_index=True), SAMPLE_SIZE_COLUMNS)
        timings = pd.DataFrame([r.model_dump(include={'method', 'k', 'B', 'trial', 'wall_time'}) for r in records])
        parameters = {'k_grid': sorted(k_grid), 'B_grid': sorted(B_grid), 'trials': trials,
                      'methods': sorted(methods)}
        return self._store('table1', parameters, results, timings)

    # ------------------------------------------------------------------
    # Export
    # ------------------------------------------------------------------

    def get_summary(self) -> pd.DataFrame:
        """Aggregate rows of the last sweep."""
        if self.results is None:
            raise ValueError("No results. Run an experiment first.")
        return self.results[self.results['row_type'] == 'aggregate']

    def export_csv(self, filepath: Union[str, Path]) -> None:
        """
        Write the result CSV plus its sidecars.

        `<out>.manifest.json` echoes the resolved config, schema version and column
        order; wall-times go to `<stem>.timings.csv`; the threshold sweep also writes
        `<stem>.attributions.tsv`.
        """
        if self.results is None:
            raise ValueError("No results to export. Run an experiment first.")
        filepath = Path(filepath)
        try:
            self.results.to_csv(filepath, index=False, float_format='%.10g')
            self.timings.to_csv(filepath.with_suffix('.timings.csv'), index=False)
            if self.attributions is not None:
                self.attributions.to_csv(filepath.with_suffix('.attributions.tsv'), sep='\t', index=False)
            manifest = {
                'schema_version': SCHEMA_VERSION,
                'experiment': self.experiment,
                'columns': list(self.results.columns),
                'parameters': self.parameters,
                'best_threshold': self.best_threshold,
                'config': self.config.model_dump(mode='json'),
            }
            with open(f'{filepath}.manifest.json', 'w', encoding='utf-8') as handle:
                json.dump(manifest, handle, indent=2, sort_keys=True)
        except OSError as e:
            raise ValueError(f"Error exporting results: {str(e)}")
        logger.info(f"Wrote {len(self.results)} rows to {filepath}")


def _typed(frame: pd.DataFrame, columns: List[str]) -> pd.DataFrame:
    frame = frame.reindex(columns=columns)
    for column in INTEGER_COLUMNS:
        if column in frame:
            frame[column] = pd.to_numeric(frame[column]).round().astype('Int64')
    return frame


def _with_aggregates(records: List[ExperimentRecord], keys: List[str]) -> pd.DataFrame:
    """Record rows, then one mean / standard-error row per group of `keys`."""
    frame = pd.DataFrame([r.model_dump(exclude={'wall_time'}) for r in records])
    numeric = [column for column in frame.columns if column not in ('method', 'rules')]
    frame[numeric] = frame[numeric].apply(pd.to_numeric)
    frame.insert(0, 'row_type', 'record')

    aggregates = []
    for group_keys, group in frame.groupby(keys, sort=True, dropna=False):
        scores = group['test_accuracy'].to_numpy(dtype=float)
        row = dict(zip(keys, group_keys))
        row.update({
            'row_type': 'aggregate',
            'k': group['k'].iloc[0],
            'B': group['B'].iloc[0],
            'C': group['C'].iloc[0],
            'n_rules': group['n_rules'].mean(),
            'train_accuracy': group['train_accuracy'].mean(),
            'eval_accuracy': group['eval_accuracy'].mean(),
            'test_accuracy': scores.mean(),
            'test_accuracy_sem': float(stats.sem(scores)) if len(scores) > 1 else np.nan,
        })
        aggregates.append(row)
    return _typed(pd.concat([frame, pd.DataFrame(aggregates)], ignore_index=True), RECORD_COLUMNS)


# ============================================================================
# Single-model operations
# ============================================================================

def run_train(data_path: Union[str, Path], method: str, config: HarnessConfig,
              out: Union[str, Path]):
    """Fit one registered method on a dataset file and save the model document."""
    data = read_dataset(data_path)
    data.require_nonempty()
    model = fit_method(method, data, config, derive_seed(config.seed, FIT_STREAM))
    save_model(model, out)
    logger.info(f"{METHODS[method]['name']}: training accuracy {accuracy(model, data):.4f}")
    return model


def run_eval(model_path: Union[str, Path], data_path: Union[str, Path],
             out: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """Accuracy and the four empirical losses of a saved model on a dataset file."""
    model = load_model(model_path)
    data = read_dataset(data_path, dimension=model.dimension or None)
    data.require_nonempty()
    row = {'m': len(data), 'accuracy': accuracy(model, data)}
    for loss in ('mis', 'margin', 'hinge', 'ramp'):
        row[f'loss_{loss}'] = empirical_loss(model, data, loss)
    metrics = pd.DataFrame([row])
    if out is not None:
        metrics.to_csv(out, index=False, float_format='%.10g')
    return metrics
