from typing import Dict, NamedTuple, Tuple

import numpy as np
import pandas as pd

from climact.common.exceptions import ValidationError
from climact.model.types import FULL_MODEL, GROUPS, VAR_S_SWEEP, Hyperparameters, ModelStructure
from climact.SVI.base_class import FitConfig, FitResult
from climact.SVI.svi import fit

ABLATION_COLUMNS = ['variant', 'var_S', 'accuracy_mean', 'accuracy_sd']


class AblationResult(NamedTuple):
    fits: Dict[Tuple[str, float], FitResult]
    table: pd.DataFrame


def parse_variants(groups=GROUPS):
    """Structures to refit: the full model then one per entry of groups.

    An entry is a group letter ('E') or several letters removed together ('EIMD' or 'E+I').
    """
    if isinstance(groups, str):
        groups = [g.strip() for g in groups.split(',') if g.strip()]
    variants = [FULL_MODEL]
    for entry in groups:
        letters = frozenset(c for c in entry.upper() if c not in '+ ')
        if not letters:
            raise ValidationError("empty ablation group")
        structure = ModelStructure(letters)
        if structure not in variants:
            variants.append(structure)
    return variants

def accuracy_row(variant, result: FitResult):
    samples = np.asarray(result.accuracy_samples, dtype=np.float64)
    return {'variant': variant, 'var_S': float(result.var_S),
            'accuracy_mean': float(samples.mean()), 'accuracy_sd': float(samples.std())}

def run_ablation(data, catalog, config=FitConfig(), groups=GROUPS, var_S_values=VAR_S_SWEEP,
                 hyper=Hyperparameters(), tensorboard_log=None, verbose=1) -> AblationResult:
    """Refit the network with each variable group structurally removed, under the same FitConfig.

    Removing a group deletes its nodes and every edge incident to them, so the
    removed coefficients are absent from the guide rather than pinned to zero.
    """
    variants = parse_variants(groups)
    fits, rows = {}, []
    for var_S in var_S_values:
        for structure in variants:
            if verbose:
                print("ablation : {} var_S={:g}".format(structure.label, var_S))
            result = fit(data, catalog, hyper, config._replace(var_S=float(var_S)), structure,
                         tensorboard_log=tensorboard_log, verbose=verbose)
            fits[(structure.label, float(var_S))] = result
            rows.append(accuracy_row(structure.label, result))
    return AblationResult(fits=fits, table=pd.DataFrame(rows, columns=ABLATION_COLUMNS))
