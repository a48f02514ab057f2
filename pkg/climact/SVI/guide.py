"""Mean-field Gaussian guide over every model parameter and per-user latent.

Leaves live in unconstrained space: theta_E is carried as ``log_theta_E``.
"""
from typing import NamedTuple

import jax
import jax.numpy as jnp
from jax.scipy.stats import norm
import numpy as np

from climact.common.densities import normal_logpdf
from climact.model.types import AXES, LatentState, ModelParameters, ModelStructure, coefficient_labels

GUIDE_INIT_VARIANCE = 0.1
CI_Z = float(norm.ppf(0.975))


class GuideState(NamedTuple):
    loc: dict
    log_scale: dict


class CoefficientSummary(NamedTuple):
    name: str
    mean: float
    ci_low: float
    ci_high: float


def unconstrained_shapes(structure: ModelStructure, n_users):
    shapes = {}
    for name, shape in structure.parameter_shapes().items():
        shapes['log_theta_E' if name == 'theta_E' else name] = shape
    if structure.has('D'):
        shapes['D'] = (n_users, len(AXES))
    shapes['S'] = (n_users,)
    return shapes

def init_guide(key, structure: ModelStructure, n_users, init_variance=GUIDE_INIT_VARIANCE):
    shapes = unconstrained_shapes(structure, n_users)
    keys = jax.random.split(key, len(shapes))
    scale = np.sqrt(init_variance)
    loc = {name: scale * jax.random.normal(k, shape) for k, (name, shape) in zip(keys, sorted(shapes.items()))}
    log_scale = {name: jnp.full(shape, np.log(scale)) for name, shape in shapes.items()}
    return GuideState(loc=loc, log_scale=log_scale)

def n_coordinates(guide: GuideState):
    return int(sum(np.size(v) for v in jax.tree_util.tree_leaves(guide)))

def coordinate_names(guide: GuideState):
    """Names of the flat coordinates, in ``ravel_pytree`` order."""
    names = []
    for part in GuideState._fields:
        tree = getattr(guide, part)
        for key in sorted(tree):
            for idx in np.ndindex(np.shape(tree[key])):
                names.append('{}/{}{}'.format(part, key, list(idx) if idx else ''))
    return names


def standard_normal_like(guide: GuideState, key, n_samples):
    """Reparameterization noise eps, one draw per leaf with a leading sample axis."""
    names = sorted(guide.loc)
    keys = jax.random.split(key, len(names))
    return {name: jax.random.normal(k, (n_samples,) + jnp.shape(guide.loc[name])) for k, name in zip(keys, names)}

def reparameterize(guide: GuideState, eps):
    return {name: guide.loc[name] + jnp.exp(guide.log_scale[name]) * eps[name] for name in guide.loc}

def guide_log_prob(guide: GuideState, z, user_weights=None):
    total = 0.0
    for name, value in z.items():
        logq = normal_logpdf(value, guide.loc[name], jnp.exp(2.0 * guide.log_scale[name]))
        if user_weights is not None and name in ('D', 'S'):
            if name == 'D':
                logq = jnp.sum(logq, axis=-1)
            logq = user_weights * logq
        total = total + jnp.sum(logq)
    return total

def split_sample(z):
    """Map an unconstrained draw to (ModelParameters, LatentState, log|Jacobian|)."""
    values = {k: v for k, v in z.items() if k not in ('D', 'S')}
    log_jacobian = 0.0
    if 'log_theta_E' in values:
        log_theta = values.pop('log_theta_E')
        values['theta_E'] = jnp.exp(log_theta)
        log_jacobian = log_theta
    return ModelParameters(**values), LatentState(D=z.get('D'), S=z['S']), log_jacobian


def summarize_guide(guide: GuideState, structure: ModelStructure):
    """Posterior mean and central 95% interval of every coefficient.

    theta_E is reported on its natural scale; its 'mean' is the log-normal median so
    that ci_low <= mean <= ci_high holds for every row.
    """
    summaries = []
    for name, shape in structure.parameter_shapes().items():
        key = 'log_theta_E' if name == 'theta_E' else name
        loc = np.atleast_1d(np.asarray(guide.loc[key], dtype=np.float64))
        scale = np.atleast_1d(np.exp(np.asarray(guide.log_scale[key], dtype=np.float64)))
        low, high = loc - CI_Z * scale, loc + CI_Z * scale
        if name == 'theta_E':
            loc, low, high = np.exp(loc), np.exp(low), np.exp(high)
        for label, m, lo, hi in zip(coefficient_labels(name, shape), loc, low, high):
            summaries.append(CoefficientSummary(label, float(m), float(lo), float(hi)))
    return summaries
