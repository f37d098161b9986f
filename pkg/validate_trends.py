#!/usr/bin/env python3
"""
Validation script for the learners' structural guarantees and experiment trends.
Checks:
1. GreedyRule: no mistakes on covered examples, bounded rule count, weak-learner error
2. BoostRule: low training error, AdaBoost bound holds
3. Lower-bound oracle: squared l2 norm grows like k * B^2
4. Learning curves: greedy + l2 beats plain l2, most at small m
5. Rule budget: accuracy peaks near the true rule count
6. Sample size: the convex relaxation scales worse in B than GreedyRule
7. Text pipeline: accuracy peaks at an interior threshold, rules found, attributions
   name firing tokens, no rules = baseline

Runs for several minutes at full size; --quick shrinks trial counts.
"""

import argparse
import logging
import sys

import numpy as np

from boost_rule import boost_rule
from datagen import (
    LowerBoundSpec,
    SyntheticSpec,
    check_kb_realizable,
    gen_lower_bound,
    gen_synthetic,
    lower_bound_certificate,
    synthetic_certificate,
)
from greedy_rules import GreedyConfig, greedy_rule, replay_greedy_selection
from linear_trainers import min_norm_margin_solver
from rules_first_core import error_rate
from rules_first_experiments import ExperimentRunner, HarnessConfig
from text_features import get_normalizer, tokenize


def report(title, errors, passes):
    """Print one check's outcome and return whether it passed."""
    for line in passes:
        print(f"   {line} ✓")
    for line in errors:
        print(f"   {line} ✗")
    status = "✓ PASSED" if not errors else f"✗ FAILED - {len(errors)} errors"
    print(f"{title}: {status}")
    return not errors


def realizable_samples(runs, m, seed):
    """(spec, data, certificate) triples with k drawn from 1..20."""
    rng = np.random.default_rng(seed)
    for run in range(runs):
        spec = SyntheticSpec(k=int(rng.integers(1, 21)), seed=run)
        data = gen_synthetic(spec, m, seed=int(rng.integers(2 ** 32)))
        yield spec, data, synthetic_certificate(spec, data)


def validate_greedy_rule(runs):
    print(f"\n{'=' * 80}\n1. GreedyRule structure ({runs} realizable samples, m = 3000)\n{'=' * 80}")
    errors, passes = [], []
    weak = 0
    for run, (spec, data, cert) in enumerate(realizable_samples(runs, 3000, seed=1)):
        config = GreedyConfig(k=spec.k, B=cert.B)
        model = greedy_rule(data, config)
        covered = model.rule_set.covered(data)
        mistakes = int(np.sum(model.predict_labels(data)[covered] != data.labels[covered]))
        if mistakes:
            errors.append(f"Run {run}: {mistakes} mistakes on covered examples")
        if len(model.rule_set) > config.max_rules:
            errors.append(f"Run {run}: {len(model.rule_set)} rules > {config.max_rules}")
        if not replay_greedy_selection(data, model):
            errors.append(f"Run {run}: a selected rule was not perfect when chosen")
        weak += error_rate(model, data) <= 0.25
    if weak < 0.95 * runs:
        errors.append(f"Training error <= 0.25 in only {weak}/{runs} runs")
    else:
        passes.append(f"Training error <= 0.25 in {weak}/{runs} runs")
    return report("GreedyRule", errors, passes)


def validate_boosting(runs):
    print(f"\n{'=' * 80}\n2. BoostRule, 20 rounds ({runs} realizable samples)\n{'=' * 80}")
    errors, passes = [], []
    for run, (spec, data, cert) in enumerate(realizable_samples(runs, 3000, seed=2)):
        model = boost_rule(data, GreedyConfig(k=spec.k, B=cert.B), rounds=20, seed=run)
        train_error = error_rate(model, data)
        bound = model.training_error_bound()
        if train_error > 0.05:
            errors.append(f"Run {run}: training error {train_error:.4f} > 0.05")
        if train_error > bound + 1e-12:
            errors.append(f"Run {run}: training error {train_error:.4f} above bound {bound:.4f}")
        else:
            passes.append(f"Run {run}: error {train_error:.4f} <= bound {bound:.4f}")
    return report("BoostRule", errors, passes)


def validate_lower_bound():
    print(f"\n{'=' * 80}\n3. Lower-bound oracle\n{'=' * 80}")
    errors, passes = [], []
    for k, B in [(1, 1), (2, 2), (3, 2)]:
        spec = LowerBoundSpec(k=k, B=B)
        data = gen_lower_bound(spec)
        cert = lower_bound_certificate(spec)
        if not check_kb_realizable(data, cert.kappa, cert.weights, B):
            errors.append(f"(k={k}, B={B}): certificate rejected")
        squared = min_norm_margin_solver(data, norm='l2').l2_norm ** 2
        floor = 25.9 if (k, B) == (2, 2) else k * B ** 2
        if squared < floor:
            errors.append(f"(k={k}, B={B}): ||w||^2 = {squared:.3f} < {floor}")
        else:
            passes.append(f"(k={k}, B={B}): ||w||^2 = {squared:.3f} >= {floor}")
    return report("Lower bound", errors, passes)


def _means(results, column):
    summary = results[results['row_type'] == 'aggregate']
    return {(row['method'], row[column]): row['test_accuracy'] for _, row in summary.iterrows()}


def validate_learning_curve(trials):
    print(f"\n{'=' * 80}\n4. Learning curves ({trials} trials)\n{'=' * 80}")
    errors, passes = [], []
    config = HarnessConfig(trials=trials)
    runner = ExperimentRunner(config)
    results = runner.run_learning_curve(config.synthetic, ['l2', 'greedy_l2'], config.m_grid, trials)
    means = _means(results, 'm')
    gaps = {}
    for m in config.m_grid:
        gaps[m] = means[('greedy_l2', m)] - means[('l2', m)]
        line = f"m={m}: greedy_l2 {means[('greedy_l2', m)]:.4f} vs l2 {means[('l2', m)]:.4f}"
        (passes if gaps[m] > 0 else errors).append(line)
    smallest, largest = min(config.m_grid), max(config.m_grid)
    line = f"Gap at m={smallest} ({gaps[smallest]:.4f}) vs m={largest} ({gaps[largest]:.4f})"
    (passes if gaps[smallest] > gaps[largest] else errors).append(line)
    return report("Learning curves", errors, passes)


def validate_kappa_sweep(trials):
    print(f"\n{'=' * 80}\n5. Rule-budget sweep ({trials} trials, m = 1500)\n{'=' * 80}")
    errors, passes = [], []
    config = HarnessConfig(trials=trials)
    runner = ExperimentRunner(config)
    results = runner.run_kappa_sweep(config.synthetic, range(31), 1500, trials)
    means = {budget: value for (_, budget), value in _means(results, 'budget').items()}
    best = max(means, key=means.get)
    for other in (0, 30):
        line = f"budget=20 {means[20]:.4f} vs budget={other} {means[other]:.4f}"
        (passes if means[20] > means[other] else errors).append(line)
    (passes if 15 <= best <= 25 else errors).append(f"Best budget {best}")
    return report("Rule budget", errors, passes)


def validate_sample_size(trials):
    print(f"\n{'=' * 80}\n6. Sample size to test error 0.1 (k = 5, B in 2, 4)\n{'=' * 80}")
    errors, passes = [], []
    runner = ExperimentRunner(HarnessConfig(trials=trials))
    results = runner.run_table1_comparison([5], [2, 4], trials)
    summary = results[results['row_type'] == 'aggregate'].set_index(['method', 'B'])
    factors = {}
    for method in ('greedy_rule', 'convex_relaxation'):
        low, high = summary.loc[(method, 2), 'm_reached'], summary.loc[(method, 4), 'm_reached']
        factors[method] = np.inf if np.isnan(high) or np.isnan(low) else high / low
        print(f"   {method:20s}: m(B=2)={low}, m(B=4)={high}, factor {factors[method]:.2f}")
    line = f"Growth factor convex {factors['convex_relaxation']:.2f} vs greedy {factors['greedy_rule']:.2f}"
    growth_ok = np.isfinite(factors['greedy_rule']) and factors['convex_relaxation'] > factors['greedy_rule']
    (passes if growth_ok else errors).append(line)
    return report("Sample size", errors, passes)


def validate_text_pipeline(trials):
    print(f"\n{'=' * 80}\n7. Text pipeline on the bundled corpus ({trials} trials)\n{'=' * 80}")
    errors, passes = [], []
    config = HarnessConfig()
    runner = ExperimentRunner(config)
    thresholds = list(config.thresholds) + [1000.0]
    results = runner.run_threshold_sweep(config.corpus, thresholds, ['l2', 'greedy_l2'], trials=trials)
    records = results[results['row_type'] == 'record']

    summary = results[(results['row_type'] == 'aggregate') & (results['method'] == 'greedy_l2')]
    curve = summary.set_index('threshold')['eval_accuracy'].loc[sorted(config.thresholds)]
    interior = curve.iloc[1:-1]
    line = (f"Eval accuracy peaks at {interior.idxmax():g} ({interior.max():.4f}); "
            f"ends {curve.iloc[0]:.4f} and {curve.iloc[-1]:.4f}")
    (passes if interior.max() > max(curve.iloc[0], curve.iloc[-1]) else errors).append(line)
    inside = curve.index[0] < runner.best_threshold < curve.index[-1]
    (passes if inside else errors).append(f"Selected threshold {runner.best_threshold:g}")

    chosen = records[(records['method'] == 'greedy_l2') & (records['threshold'] == runner.best_threshold)]
    if int(chosen['n_rules'].iloc[0]) == 0:
        errors.append(f"No rules at the selected threshold {runner.best_threshold:g}")
    else:
        passes.append(f"{int(chosen['n_rules'].iloc[0])} rules at threshold {runner.best_threshold:g}")

    normalizer = get_normalizer(config.normalizer)
    attributed = runner.attributions[runner.attributions['rule_token'].fillna('') != '']
    missing = [text for text, token in zip(attributed['text'], attributed['rule_token'])
               if token not in tokenize(text, normalizer)]
    if missing:
        errors.append(f"{len(missing)} attributions name a token absent from the document")
    else:
        passes.append(f"{len(attributed)} rule-attributed predictions name a firing token")

    baseline = records[records['method'] == 'l2'].set_index(['threshold', 'trial'])['test_accuracy']
    empty = records[(records['method'] == 'greedy_l2') & (records['n_candidates'] == 0)]
    if empty.empty:
        errors.append("No threshold left the candidate pool empty")
    for _, row in empty.iterrows():
        expected = baseline[(row['threshold'], row['trial'])]
        line = (f"threshold={row['threshold']:g}, trial {row['trial']}: "
                f"{row['test_accuracy']:.4f} vs baseline {expected:.4f}")
        (passes if row['test_accuracy'] == expected else errors).append(line)
    return report("Text pipeline", errors, passes)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description='Validate learner guarantees and experiment trends')
    parser.add_argument('--quick', action='store_true', help='Fewer runs and trials')
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)

    runs, trials = (10, 5) if args.quick else (50, 20)
    results = [
        ('GreedyRule structure', validate_greedy_rule(runs)),
        ('BoostRule', validate_boosting(max(3, runs // 5))),
        ('Lower-bound oracle', validate_lower_bound()),
        ('Learning curves', validate_learning_curve(trials)),
        ('Rule-budget sweep', validate_kappa_sweep(trials)),
        ('Sample size', validate_sample_size(max(3, trials // 4))),
        ('Text pipeline', validate_text_pipeline(max(3, trials // 4))),
    ]

    print(f"\n{'=' * 80}")
    print("FINAL SUMMARY")
    print(f"{'=' * 80}")
    for name, passed in results:
        status = "✓ PASS" if passed else "✗ FAIL"
        print(f"{name:25s}: {status}")
    return 0 if all(passed for _, passed in results) else 1


if __name__ == '__main__':
    sys.exit(main())
