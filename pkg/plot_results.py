"""
Plotting utilities for experiment result CSVs.
Renders learning curves, rule-budget sweeps and threshold sweeps offline.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd

from rules_first_core import DataError
from rules_first_experiments import METHODS

logger = logging.getLogger(__name__)


class CurvePlotter:
    """Creates plots from the aggregate rows of a result CSV."""

    # Colors for each method (distinct and accessible)
    METHOD_COLORS = {
        'l2': '#1f77b4',  # Blue
        'l1': '#ff7f0e',  # Orange
        'greedy_l2': '#2ca02c',  # Green
        'greedy_l1': '#9467bd',  # Purple
        'greedy_rule': '#17becf',  # Cyan
        'boost_rule': '#8c564b',  # Brown
        'convex_relaxation': '#d62728',  # Red
    }

    METHOD_MARKERS = {
        'l2': 's',
        'l1': '^',
        'greedy_l2': 'o',
        'greedy_l1': 'x',
        'greedy_rule': 'D',
        'boost_rule': 'v',
        'convex_relaxation': 'P',
    }

    # x-axis column and label per experiment
    AXES = {
        'curve': ('m', 'Training Examples (m)'),
        'kappa': ('budget', 'Rule Budget'),
        'threshold': ('threshold', 'Near-Rule Score Threshold'),
    }

    TITLES = {
        'curve': 'Test Accuracy vs Training Size',
        'kappa': 'Test Accuracy vs Rule Budget',
        'threshold': 'Accuracy vs Near-Rule Threshold',
    }

    @staticmethod
    def load(filepath: Union[str, Path]) -> Tuple[pd.DataFrame, Dict]:
        """Read a result CSV and its manifest."""
        manifest_path = Path(f'{filepath}.manifest.json')
        try:
            results = pd.read_csv(filepath)
            with open(manifest_path, 'r', encoding='utf-8') as handle:
                manifest = json.load(handle)
        except (OSError, json.JSONDecodeError, pd.errors.ParserError) as e:
            raise DataError(f"Error loading results from {filepath}: {str(e)}")
        return results, manifest

    @staticmethod
    def create_plot(results: pd.DataFrame, experiment: str) -> plt.Figure:
        """
        Plot mean test accuracy (with standard-error bars) of every method.

        Args:
            results: Result table written by ExperimentRunner.export_csv
            experiment: 'curve', 'kappa' or 'threshold'

        Returns:
            matplotlib Figure
        """
        if experiment not in CurvePlotter.AXES:
            raise DataError(f"No plot for experiment '{experiment}'")
        column, xlabel = CurvePlotter.AXES[experiment]
        summary = results[results['row_type'] == 'aggregate'].sort_values(['method', column])

        fig, ax = plt.subplots(figsize=(9, 6))
        for method, rows in summary.groupby('method', sort=True):
            sem = rows['test_accuracy_sem'].fillna(0.0)
            ax.errorbar(rows[column], rows['test_accuracy'], yerr=sem,
                        color=CurvePlotter.METHOD_COLORS.get(method, '#000000'),
                        marker=CurvePlotter.METHOD_MARKERS.get(method, 'o'),
                        label=METHODS.get(method, {}).get('name', method),
                        linewidth=2, markersize=6, capsize=3)

        if experiment == 'threshold' and 'eval_accuracy' in summary:
            for method, rows in summary.groupby('method', sort=True):
                ax.plot(rows[column], rows['eval_accuracy'], linestyle='--', alpha=0.5,
                        color=CurvePlotter.METHOD_COLORS.get(method, '#000000'))

        ax.set_xlabel(xlabel, fontsize=11, fontweight='bold')
        ax.set_ylabel('Test Accuracy', fontsize=11, fontweight='bold')
        ax.set_title(CurvePlotter.TITLES[experiment], fontsize=12, fontweight='bold')
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=9, loc='best')
        ax.yaxis.set_major_formatter(plt.FuncFormatter(lambda y, p: f'{y:.1%}'))
        fig.tight_layout()
        return fig

    @staticmethod
    def save(filepath: Union[str, Path], out: Optional[Union[str, Path]] = None) -> Path:
        """Render a result CSV to PNG next to it (or to `out`)."""
        results, manifest = CurvePlotter.load(filepath)
        fig = CurvePlotter.create_plot(results, manifest.get('experiment'))
        out = Path(out) if out else Path(filepath).with_suffix('.png')
        fig.savefig(out, dpi=150)
        plt.close(fig)
        logger.info(f"Saved plot to {out}")
        return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description='Render an experiment result CSV to PNG')
    parser.add_argument('results', help='CSV written by curve, kappa or threshold')
    parser.add_argument('--out', help='PNG path (default: next to the CSV)')
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    try:
        CurvePlotter.save(args.results, args.out)
    except DataError as e:
        logger.error(str(e))
        return 3
    return 0


if __name__ == '__main__':
    sys.exit(main())
