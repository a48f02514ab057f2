import glob
import json
import os
from typing import NamedTuple

import numpy as np
import pandas as pd

from climact.common.exceptions import ValidationError
from climact.common.utils import pearson
from climact.model.types import FULL_MODEL, Hyperparameters
from climact.SVI.base_class import FitConfig, FitResult
from climact.SVI.svi import fit

ROBUSTNESS_COLUMNS = ['name', 'mean_gap', 'mean_no_gap']


class RobustnessSummary(NamedTuple):
    var_S: float
    correlation: float
    table: pd.DataFrame


class RobustnessResult(NamedTuple):
    correlation: float
    table: pd.DataFrame
    fit_gap: FitResult
    fit_no_gap: FitResult

    def summary(self):
        return RobustnessSummary(float(self.fit_gap.var_S), self.correlation, self.table)


def paired_coefficients(fit_gap: FitResult, fit_no_gap: FitResult):
    """Posterior means of the coefficients both fits share; D and S are latents and never listed."""
    no_gap = {s.name: s.mean for s in fit_no_gap.parameters}
    rows = [{'name': s.name, 'mean_gap': s.mean, 'mean_no_gap': no_gap[s.name]}
            for s in fit_gap.parameters if s.name in no_gap]
    return pd.DataFrame(rows, columns=ROBUSTNESS_COLUMNS)

def coefficient_correlation(table: pd.DataFrame):
    if len(table) < 3:
        raise ValidationError("need at least 3 coefficients to correlate, got {}".format(len(table)))
    x = table['mean_gap'].to_numpy(dtype=np.float64)
    y = table['mean_no_gap'].to_numpy(dtype=np.float64)
    if not (x.std() > 0 and y.std() > 0):
        raise ValidationError("coefficient means are constant; correlation undefined")
    return pearson(x, y)

def run_robustness(data_gap, data_no_gap, catalog, config=FitConfig(), hyper=Hyperparameters(),
                   structure=FULL_MODEL, tensorboard_log=None, verbose=1) -> RobustnessResult:
    """Fit with and without the four-week gap before the short-term window and correlate the coefficients."""
    fit_gap = fit(data_gap, catalog, hyper, config, structure, tensorboard_log, verbose)
    fit_no_gap = fit(data_no_gap, catalog, hyper, config, structure, tensorboard_log, verbose)
    table = paired_coefficients(fit_gap, fit_no_gap)
    correlation = coefficient_correlation(table)
    if verbose:
        print("coefficient correlation (gap vs no gap) : {:.4f}".format(correlation))
    return RobustnessResult(correlation=correlation, table=table, fit_gap=fit_gap, fit_no_gap=fit_no_gap)


def robustness_name(var_S, n_values=1):
    return 'robustness' if n_values == 1 else 'robustness_varS_{:g}'.format(var_S)

def save_robustness(out_dir, summary: RobustnessSummary, n_values=1):
    """Write ``<name>.csv`` (paired means) and ``<name>.json`` (correlation, var_S); returns both paths."""
    base = os.path.join(out_dir, robustness_name(summary.var_S, n_values))
    summary.table.loc[:, ROBUSTNESS_COLUMNS].to_csv(base + '.csv', index=False, float_format='%.17g')
    with open(base + '.json', 'w') as f:
        json.dump({'correlation': float(summary.correlation), 'var_S': float(summary.var_S)}, f, indent=1,
                  allow_nan=False)
    return [base + '.csv', base + '.json']

def load_robustness(in_dir):
    """Every robustness.json or robustness_varS_*.json with its CSV twin under in_dir, ordered by var_S."""
    summaries = []
    paths = glob.glob(os.path.join(in_dir, 'robustness.json'))
    paths += glob.glob(os.path.join(in_dir, 'robustness_varS_*.json'))
    for path in sorted(paths):
        table_path = path[:-len('.json')] + '.csv'
        try:
            with open(path) as f:
                raw = json.load(f)
            table = pd.read_csv(table_path)
        except (OSError, json.JSONDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ValidationError("cannot read robustness result: {}".format(e), path=path)
        missing = [c for c in ROBUSTNESS_COLUMNS if c not in table.columns]
        if missing or 'correlation' not in raw:
            raise ValidationError("malformed robustness result, missing {}".format(missing or ['correlation']),
                                  path=table_path)
        summaries.append(RobustnessSummary(float(raw.get('var_S', 1.0)), float(raw['correlation']),
                                           table.loc[:, ROBUSTNESS_COLUMNS]))
    return sorted(summaries, key=lambda s: s.var_S)
