"""CSV tables and SVG figures from fit results.

Every figure has a CSV twin holding the plotted numbers.
"""
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from climact.common.exceptions import ValidationError
from climact.experiments.ablation import ABLATION_COLUMNS
from climact.experiments.diagnostics import sympathy_histogram
from climact.experiments.robustness import ROBUSTNESS_COLUMNS
from climact.model.types import AXES, EQUATION_OF

COEFFICIENT_COLUMNS = ['name', 'mean', 'ci_low', 'ci_high', 'var_S']
HISTOGRAM_COLUMNS = ['var_S', 'A', 'bin_low', 'bin_high', 'count']
ENGAGEMENT_COLUMNS = ['user', 'axis', 'proxy', 'E_L']
PANEL_ORDER = ('engagement', 'participation_long', 'sympathy', 'participation_short', 'interaction', 'activation')

# fixed ids and no date make repeated runs byte-identical
plt.rcParams['svg.hashsalt'] = 'climact'
plt.rcParams['svg.fonttype'] = 'none'
SVG_METADATA = {'Date': None}


def _writable(out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ValidationError("cannot create output directory: {}".format(e), path=out_dir)
    if not os.access(out_dir, os.W_OK):
        raise ValidationError("output directory is not writable", path=out_dir)

def _save(fig, path):
    fig.savefig(path, format='svg', metadata=SVG_METADATA)
    plt.close(fig)
    return path


def coefficient_table(fit_results):
    rows = [dict(s._asdict(), var_S=float(r.var_S)) for r in fit_results for s in r.parameters]
    return pd.DataFrame(rows, columns=COEFFICIENT_COLUMNS)

def plot_errorbars(table: pd.DataFrame, path):
    """Posterior means with 95% intervals, one panel per target equation and one series per var_S."""
    equation = table['name'].str.split('[', regex=False).str[0].map(EQUATION_OF)
    panels = [p for p in PANEL_ORDER if (equation == p).any()]
    var_S_values = sorted(table['var_S'].unique())
    offsets = np.linspace(-0.25, 0.25, len(var_S_values)) if len(var_S_values) > 1 else [0.0]

    fig, axes = plt.subplots(len(panels), 1, figsize=(8, 2.5 * len(panels)), squeeze=False)
    for ax, panel in zip(axes[:, 0], panels):
        block = table[equation == panel]
        names = list(dict.fromkeys(block['name']))
        ax.axvline(0.0, color='grey', lw=0.8, ls='--')
        for offset, var_S in zip(offsets, var_S_values):
            rows = block[block['var_S'] == var_S].set_index('name').reindex(names)
            y = np.arange(len(names)) + offset
            ax.errorbar(rows['mean'], y, xerr=[rows['mean'] - rows['ci_low'], rows['ci_high'] - rows['mean']],
                        fmt='o', ms=3, capsize=2, label='var(S)={:g}'.format(var_S))
        ax.set_yticks(np.arange(len(names)))
        ax.set_yticklabels(names, fontsize=7)
        ax.set_title(panel.replace('_', ' '), fontsize=9)
    axes[0, 0].legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def histogram_table(fit_results, bins=20):
    frames = []
    for r in fit_results:
        frame = sympathy_histogram(r, bins=bins)
        frame.insert(0, 'var_S', float(r.var_S))
        frames.append(frame)
    return pd.concat(frames, ignore_index=True).loc[:, HISTOGRAM_COLUMNS]

def plot_sympathy(table: pd.DataFrame, path):
    var_S_values = sorted(table['var_S'].unique())
    fig, axes = plt.subplots(1, len(var_S_values), figsize=(4 * len(var_S_values), 3), squeeze=False)
    for ax, var_S in zip(axes[0], var_S_values):
        block = table[table['var_S'] == var_S]
        for a, color in ((0, 'tab:blue'), (1, 'tab:red')):
            rows = block[block['A'] == a]
            total = max(1, rows['count'].sum())
            ax.stairs(rows['count'].to_numpy() / total, np.append(rows['bin_low'].to_numpy(),
                      rows['bin_high'].to_numpy()[-1:]), color=color, label='A={}'.format(a))
        ax.set_title('var(S)={:g}'.format(var_S), fontsize=9)
        ax.set_xlabel('posterior mean of S')
    axes[0, 0].legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_ablation(table: pd.DataFrame, path):
    variants = list(dict.fromkeys(table['variant']))
    var_S_values = sorted(table['var_S'].unique())
    fig, ax = plt.subplots(figsize=(1.2 * len(variants) + 3, 3))
    offsets = np.linspace(-0.2, 0.2, len(var_S_values)) if len(var_S_values) > 1 else [0.0]
    for offset, var_S in zip(offsets, var_S_values):
        rows = table[table['var_S'] == var_S].set_index('variant').reindex(variants)
        ax.errorbar(np.arange(len(variants)) + offset, rows['accuracy_mean'], yerr=rows['accuracy_sd'],
                    fmt='o', capsize=3, label='var(S)={:g}'.format(var_S))
    ax.set_xticks(np.arange(len(variants)))
    ax.set_xticklabels(variants)
    ax.set_ylabel('posterior predictive accuracy')
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_engagement(joint: pd.DataFrame, path, correlations=None):
    """Scatter of the participation-weighted axis proxy against long-term engagement, one panel per axis."""
    fig, axes = plt.subplots(1, len(AXES), figsize=(3.2 * len(AXES), 3), squeeze=False, sharey=True)
    for ax, axis in zip(axes[0], AXES):
        rows = joint[joint['axis'] == axis]
        ax.scatter(rows['proxy'], rows['E_L'], s=4, alpha=0.4, color='tab:blue', linewidths=0)
        title = axis
        if correlations is not None and axis in correlations:
            title += ' (r={:.2f})'.format(correlations[axis])
        ax.set_title(title, fontsize=9)
        ax.set_xlabel('P_L . D_sub')
    axes[0, 0].set_ylabel('E_L')
    fig.tight_layout()
    return _save(fig, path)


def robustness_table(summaries):
    frames = []
    for s in summaries:
        frame = s.table.loc[:, ROBUSTNESS_COLUMNS].copy()
        frame.insert(0, 'var_S', float(s.var_S))
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)

def plot_robustness(summaries, path):
    """Posterior means with the gap against without it; points on the diagonal agree."""
    fig, axes = plt.subplots(1, len(summaries), figsize=(4 * len(summaries), 4), squeeze=False)
    for ax, s in zip(axes[0], summaries):
        x, y = s.table['mean_gap'].to_numpy(), s.table['mean_no_gap'].to_numpy()
        lo, hi = float(min(x.min(), y.min())), float(max(x.max(), y.max()))
        ax.plot([lo, hi], [lo, hi], color='grey', lw=0.8, ls='--')
        ax.scatter(x, y, s=10, color='tab:blue')
        ax.set_title('var(S)={:g}, r={:.3f}'.format(s.var_S, s.correlation), fontsize=9)
        ax.set_xlabel('posterior mean, 4-week gap')
        ax.set_ylabel('posterior mean, no gap')
    fig.tight_layout()
    return _save(fig, path)


def report(fit_results, out_dir, ablation_table=None, engagement=None, robustness=None, engagement_joint=None):
    """Write coefficients and sympathy outputs, plus ablation, engagement and robustness ones when given.

    ``robustness`` is one or more ``RobustnessSummary`` (or ``RobustnessResult``) values.

    Returns the written paths.
    """
    fit_results = list(fit_results)
    if not fit_results:
        raise ValidationError("report needs at least one fit result")
    _writable(out_dir)
    out = lambda name: os.path.join(out_dir, name)
    written = []

    coefficients = coefficient_table(fit_results)
    coefficients.to_csv(out('coefficients.csv'), index=False, float_format='%.17g')
    written += [out('coefficients.csv'), plot_errorbars(coefficients, out('errorbars.svg'))]

    histogram = histogram_table(fit_results)
    histogram.to_csv(out('sympathy_hist.csv'), index=False, float_format='%.17g')
    written += [out('sympathy_hist.csv'), plot_sympathy(histogram, out('sympathy_hist.svg'))]

    if ablation_table is not None and len(ablation_table):
        ablation_table = ablation_table.loc[:, ABLATION_COLUMNS]
        ablation_table.to_csv(out('ablation.csv'), index=False, float_format='%.17g')
        written += [out('ablation.csv'), plot_ablation(ablation_table, out('ablation.svg'))]

    if engagement is not None:
        frame = pd.DataFrame({'axis': list(engagement), 'correlation': list(engagement.values())})
        frame.to_csv(out('engagement_correlation.csv'), index=False, float_format='%.17g')
        written.append(out('engagement_correlation.csv'))

    if engagement_joint is not None and len(engagement_joint):
        engagement_joint = engagement_joint.loc[:, ENGAGEMENT_COLUMNS]
        engagement_joint.to_csv(out('engagement_joint.csv'), index=False, float_format='%.17g')
        written += [out('engagement_joint.csv'),
                    plot_engagement(engagement_joint, out('engagement_joint.svg'), engagement)]

    if robustness is not None:
        summaries = [robustness] if hasattr(robustness, 'table') else list(robustness)
        summaries = [s.summary() if hasattr(s, 'summary') else s for s in summaries]
        if summaries:
            robustness_table(summaries).to_csv(out('robustness.csv'), index=False, float_format='%.17g')
            frame = pd.DataFrame({'var_S': [float(s.var_S) for s in summaries],
                                  'correlation': [float(s.correlation) for s in summaries]})
            frame.to_csv(out('robustness_correlation.csv'), index=False, float_format='%.17g')
            written += [out('robustness.csv'), out('robustness_correlation.csv'),
                        plot_robustness(summaries, out('robustness.svg'))]
    return written
