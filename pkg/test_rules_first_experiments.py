"""
Tests for the experiment harness and the command-line interface, at small scale.
"""

import json

import numpy as np
import pandas as pd
import pytest

from cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, apply_cli_overrides, build_parser, main
from datagen import SyntheticSpec, gen_synthetic
from rules_first_core import ConfigError, load_model, write_dataset
from rules_first_experiments import (
    METHODS,
    RECORD_COLUMNS,
    ExperimentRunner,
    HarnessConfig,
    derive_seed,
    run_eval,
    run_train,
)

SMALL_SPEC = SyntheticSpec(d_total=30, k=3, p_rule=0.1)


def small_config(**overrides):
    settings = dict(trials=1, test_size=200, budget=3, max_epochs=50, synthetic=SMALL_SPEC)
    settings.update(overrides)
    return HarnessConfig(**settings)


def records(results):
    return results[results['row_type'] == 'record']


@pytest.fixture
def corpus(tmp_path):
    words = ['plot', 'cast', 'music', 'scene', 'ending', 'story']
    lines = []
    for i in range(150):
        label = 1 if i % 3 else -1
        cue = 'great' if label == 1 else 'awful'
        lines.append(f"{label:+d}\t{cue} {words[i % 6]} {words[(i * 5) % 7 % 6]}")
    path = tmp_path / 'corpus.tsv'
    path.write_text('\n'.join(lines) + '\n')
    return path


# ============================================================================
# Harness
# ============================================================================

def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
    assert 0 <= derive_seed(7) < 2 ** 32


def test_registry_entries():
    assert set(METHODS) == {'l2', 'l1', 'greedy_l2', 'greedy_l1', 'greedy_rule', 'boost_rule',
                            'convex_relaxation'}
    for info in METHODS.values():
        assert {'name', 'description', 'func'} <= set(info)


def test_learning_curve_single_cell():
    runner = ExperimentRunner(small_config())
    results = runner.run_learning_curve(SMALL_SPEC, ['l2'], [300], 1)
    assert list(results.columns) == RECORD_COLUMNS
    assert list(results['row_type']) == ['record', 'aggregate']
    assert results['test_accuracy'].iloc[0] == results['test_accuracy'].iloc[1]
    assert np.isnan(results['test_accuracy_sem'].iloc[1])
    assert len(runner.get_summary()) == 1
    assert list(runner.timings.columns) == ['method', 'm', 'trial', 'wall_time']


def test_learning_curve_rejects_unknown_method():
    with pytest.raises(ConfigError, match='Unknown method'):
        ExperimentRunner(small_config()).run_learning_curve(SMALL_SPEC, ['svm'], [300], 1)


def test_learning_curve_is_reproducible(tmp_path):
    paths = []
    for name in ('first.csv', 'second.csv'):
        runner = ExperimentRunner(small_config())
        runner.run_learning_curve(SMALL_SPEC, ['l2', 'greedy_l2'], [150, 300], 2)
        runner.export_csv(tmp_path / name)
        paths.append(tmp_path / name)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_learning_curve_greedy_takes_only_rule_coordinates():
    runner = ExperimentRunner(small_config())
    row = records(runner.run_learning_curve(SMALL_SPEC, ['greedy_l2'], [300], 1)).iloc[0]
    features = sorted(int(rule.split(':')[0]) for rule in row['rules'].split())
    assert features == [0, 1, 2]


def test_process_pool_keeps_results():
    serial = ExperimentRunner(small_config()).run_learning_curve(SMALL_SPEC, ['l2'], [150, 300], 2)
    pooled = ExperimentRunner(small_config(jobs=2)).run_learning_curve(SMALL_SPEC, ['l2'], [150, 300], 2)
    pd.testing.assert_frame_equal(serial, pooled)


def test_zero_budget_matches_plain_logistic():
    config = small_config()
    kappa = ExperimentRunner(config).run_kappa_sweep(SMALL_SPEC, [0], 300, 1)
    curve = ExperimentRunner(config).run_learning_curve(SMALL_SPEC, ['l2'], [300], 1)
    assert records(kappa)['n_rules'].iloc[0] == 0
    assert records(kappa)['test_accuracy'].iloc[0] == records(curve)['test_accuracy'].iloc[0]


def test_kappa_budgets_are_nested_prefixes():
    runner = ExperimentRunner(small_config())
    results = records(runner.run_kappa_sweep(SMALL_SPEC, [3, 0, 1], 300, 1)).sort_values('budget')
    assert list(results['budget']) == [0, 1, 3]
    rules = list(results['rules'].fillna(''))
    assert rules[0] == ''
    assert rules[2].startswith(rules[1])
    assert all(n <= b for n, b in zip(results['n_rules'], results['budget']))


def test_threshold_sweep_without_candidates_is_baseline(corpus):
    runner = ExperimentRunner(small_config(normalizer='identity'))
    results = runner.run_threshold_sweep(corpus, [0.5, 1000.0], ['l2', 'greedy_l2'])
    rows = records(results).set_index(['method', 'threshold'])
    assert rows.loc[('greedy_l2', 1000.0), 'n_candidates'] == 0
    assert rows.loc[('greedy_l2', 1000.0), 'test_accuracy'] == rows.loc[('l2', 1000.0), 'test_accuracy']
    assert runner.best_threshold in (0.5, 1000.0)
    assert list(runner.attributions.columns) == \
        ['text', 'label', 'greedy_prediction', 'baseline_prediction', 'rule_token']
    assert len(runner.attributions) == 45


def test_threshold_sweep_restricts_methods(corpus):
    with pytest.raises(ConfigError):
        ExperimentRunner(small_config()).run_threshold_sweep(corpus, [1.0], ['greedy_rule'])


def test_table1_loose_epsilon_is_reached():
    config = small_config(epsilon=0.5, m_min=20, m_max=200, b1_grid=(1.0,))
    runner = ExperimentRunner(config)
    results = runner.run_table1_comparison([2], [2], 1, methods=['greedy_rule'])
    record = records(results).iloc[0]
    assert record['status'] == 'REACHED'
    assert 20 <= record['m_reached'] <= 200
    assert runner.get_summary()['n_reached'].iloc[0] == 1


def test_export_writes_sidecars(tmp_path):
    runner = ExperimentRunner(small_config())
    runner.run_learning_curve(SMALL_SPEC, ['l2'], [300], 1)
    out = tmp_path / 'curve.csv'
    runner.export_csv(out)

    assert list(pd.read_csv(out).columns) == RECORD_COLUMNS
    assert (tmp_path / 'curve.timings.csv').exists()
    manifest = json.loads((tmp_path / 'curve.csv.manifest.json').read_text())
    assert manifest['schema_version'] == 1
    assert manifest['experiment'] == 'curve'
    assert manifest['columns'] == RECORD_COLUMNS
    assert manifest['parameters']['m_grid'] == [300]


def test_summary_and_export_need_results(tmp_path):
    runner = ExperimentRunner(small_config())
    with pytest.raises(ValueError, match='No results'):
        runner.get_summary()
    with pytest.raises(ValueError, match='No results'):
        runner.export_csv(tmp_path / 'empty.csv')


def test_train_and_eval_roundtrip(tmp_path):
    data_path = tmp_path / 'train.txt'
    write_dataset(gen_synthetic(SMALL_SPEC, 200, seed=0), data_path)
    model = run_train(data_path, 'greedy_rule', small_config(k=3, B=5.0), tmp_path / 'model.json')
    loaded = load_model(tmp_path / 'model.json')
    assert np.array_equal(loaded.predict_labels(gen_synthetic(SMALL_SPEC, 50, seed=1)),
                          model.predict_labels(gen_synthetic(SMALL_SPEC, 50, seed=1)))

    metrics = run_eval(tmp_path / 'model.json', data_path, tmp_path / 'metrics.csv')
    assert list(metrics.columns) == ['m', 'accuracy', 'loss_mis', 'loss_margin', 'loss_hinge', 'loss_ramp']
    assert metrics['m'].iloc[0] == 200
    assert metrics['loss_mis'].iloc[0] <= metrics['loss_ramp'].iloc[0] <= metrics['loss_hinge'].iloc[0]


# ============================================================================
# CLI
# ============================================================================

def parse(*argv):
    return build_parser().parse_args(list(argv))


def test_overrides_for_grid_commands():
    cfg = {'synthetic': {'d_total': 50}}
    table1 = apply_cli_overrides(cfg, parse('table1', '--k', '3', '4', '--B', '2', '4'))
    assert table1['k_grid'] == [3, 4]
    assert table1['B_grid'] == [2, 4]

    curve = apply_cli_overrides(cfg, parse('curve', '--m', '100', '200', '--k', '5'))
    assert curve['m_grid'] == [100, 200]
    assert curve['synthetic'] == {'d_total': 50, 'k': 5}
    assert cfg == {'synthetic': {'d_total': 50}}

    kappa = apply_cli_overrides({}, parse('kappa', '--budget', '4'))
    assert kappa['kappa_grid'] == [0, 1, 2, 3, 4]


def test_overrides_reject_fractional_table1_bound():
    with pytest.raises(ConfigError):
        apply_cli_overrides({}, parse('table1', '--B', '2.5'))


def test_cli_gen_train_eval(tmp_path, capsys):
    data = tmp_path / 'data.txt'
    model = tmp_path / 'model.json'
    assert main(['gen', 'synthetic', '--m', '60', '--k', '3', '--out', str(data), '-q']) == EXIT_OK
    assert main(['train', '--data', str(data), '--method', 'l2', '--out', str(model), '-q']) == EXIT_OK
    assert main(['eval', '--model', str(model), '--data', str(data), '-q']) == EXIT_OK
    assert 'accuracy' in capsys.readouterr().out


def test_cli_lowerbound(tmp_path):
    out = tmp_path / 'lb.txt'
    assert main(['gen', 'lowerbound', '--k', '2', '--B', '2', '--out', str(out), '-q']) == EXIT_OK
    assert out.read_text().count('\n') == 7
    assert main(['gen', 'lowerbound', '--B', '2.5', '--out', str(out), '-q']) == EXIT_CONFIG


def test_cli_config_errors(tmp_path):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'no_such_field': 1}))
    assert main(['curve', '--config', str(config), '-q']) == EXIT_CONFIG
    config.write_text('{not json')
    assert main(['curve', '--config', str(config), '-q']) == EXIT_CONFIG
    assert main(['curve', '--method', 'svm', '--out', str(tmp_path / 'x.csv'), '-q']) == EXIT_CONFIG


def test_cli_data_errors(tmp_path):
    assert main(['train', '--data', str(tmp_path / 'missing.txt'), '-q']) == EXIT_DATA
    bad = tmp_path / 'bad.txt'
    bad.write_text('+1 0:1\n7 1:1\n')
    assert main(['train', '--data', str(bad), '-q']) == EXIT_DATA
    bad.write_text('# dimension=abc\n+1 0:1\n')
    assert main(['train', '--data', str(bad), '-q']) == EXIT_DATA


RERUN_CONFIG = {
    'test_size': 200,
    'max_epochs': 50,
    'epsilon': 0.5,
    'm_min': 20,
    'm_max': 200,
    'b1_grid': [1.0],
    'normalizer': 'identity',
    'synthetic': {'d_total': 30, 'k': 3, 'p_rule': 0.1},
}


@pytest.mark.parametrize('argv, result', [
    (['gen', 'synthetic', '--m', '80', '--seed', '5'], 'data.txt'),
    (['kappa', '--m', '150', '--budget', '2', '--trials', '2'], 'kappa.csv'),
    (['threshold', '--thresholds', '0.5', '1000', '--trials', '2'], 'threshold.csv'),
    (['table1', '--k', '2', '--B', '2', '--trials', '1', '--method', 'greedy_rule'], 'table1.csv'),
])
def test_cli_rerun_is_byte_identical(tmp_path, corpus, argv, result):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps(RERUN_CONFIG))
    if argv[0] == 'threshold':
        argv = argv + ['--corpus', str(corpus)]
    runs = []
    for name in ('first', 'second'):
        out = tmp_path / name / result
        out.parent.mkdir()
        assert main(argv + ['--config', str(config), '--out', str(out), '-q']) == EXIT_OK
        runs.append({path.name: path.read_bytes() for path in out.parent.iterdir()
                     if not path.name.endswith('.timings.csv')})
    assert result in runs[0]
    assert runs[0] == runs[1]
