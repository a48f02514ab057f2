import numpy as np
import pandas as pd

from climact.common.exceptions import ValidationError
from climact.common.utils import pearson
from climact.model.types import AXES, SubredditCatalog, stack_observations
from climact.SVI.guide import GuideState


def _sympathy(fit_or_sympathy, A=None):
    if A is None:
        return np.asarray(fit_or_sympathy.sympathy_mean, dtype=np.float64), np.asarray(fit_or_sympathy.activations)
    return np.asarray(fit_or_sympathy, dtype=np.float64), np.asarray(A)

def sympathy_separation(fit_or_sympathy, A=None):
    """mean(S | A=1) - mean(S | A=0) over per-user posterior means of S."""
    S, A = _sympathy(fit_or_sympathy, A)
    if not (np.any(A == 1) and np.any(A == 0)):
        raise ValidationError("sympathy separation needs users with both A=0 and A=1")
    return float(S[A == 1].mean() - S[A == 0].mean())

def sympathy_histogram(fit_or_sympathy, A=None, bins=20):
    """Counts of posterior-mean S per activation class on shared bin edges."""
    S, A = _sympathy(fit_or_sympathy, A)
    edges = np.histogram_bin_edges(S, bins=bins)
    rows = []
    for a in (0, 1):
        counts, _ = np.histogram(S[A == a], bins=edges)
        rows.extend({'A': a, 'bin_low': float(lo), 'bin_high': float(hi), 'count': int(c)}
                    for lo, hi, c in zip(edges[:-1], edges[1:], counts))
    return pd.DataFrame(rows, columns=['A', 'bin_low', 'bin_high', 'count'])


def standardized_sociodemographics(guide: GuideState):
    """Posterior means of D z-scored per axis, shape (n_users, 4)."""
    if 'D' not in guide.loc:
        raise ValidationError("guide has no sociodemographic latent (D removed)")
    D = np.asarray(guide.loc['D'], dtype=np.float64)
    sd = D.std(axis=0, ddof=1)
    if D.shape[0] < 2 or not np.all(sd > 0):
        raise ValidationError("cannot standardize D over fewer than 2 distinct users")
    return (D - D.mean(axis=0)) / sd

def engagement_correlations(data, catalog: SubredditCatalog):
    """Pearson correlation, per axis, between P_L . D_sub and long-term engagement E_L."""
    data = stack_observations(data)
    proxy = np.asarray(data.P_L, dtype=np.float64) @ catalog.D_sub
    E_L = np.asarray(data.E_L, dtype=np.float64)
    correlations = {}
    for j, axis in enumerate(AXES):
        if proxy[:, j].std() > 0 and E_L.std() > 0:
            correlations[axis] = pearson(proxy[:, j], E_L)
        else:
            correlations[axis] = float('nan')
    return correlations

def engagement_joint(data, catalog: SubredditCatalog):
    """Per-user (proxy, E_L) pairs for each axis, long format with columns user, axis, proxy, E_L."""
    data = stack_observations(data)
    proxy = np.asarray(data.P_L, dtype=np.float64) @ catalog.D_sub
    E_L = np.asarray(data.E_L, dtype=np.float64)
    users = np.arange(len(E_L))
    frames = [pd.DataFrame({'user': users, 'axis': axis, 'proxy': proxy[:, j], 'E_L': E_L})
              for j, axis in enumerate(AXES)]
    return pd.concat(frames, ignore_index=True)
