"""Node densities of the activation network and its joint log density.

Every node is written once as a batched function of arrays (``_*`` helpers, safe
under ``jax.jit``/``jax.grad``) and exposed through a validating public wrapper.
Coefficients that are None belong to a structurally removed variable group and
contribute no term.

DAG, in ancestral order:
    D, E_L, M_L, M_S (roots) -> E_S -> P_L -> S -> P_S -> I -> A
"""
import jax.numpy as jnp
import numpy as np

from climact.common.densities import bernoulli_logpmf, lognormal_logpdf, normal_logpdf
from climact.common.exceptions import ValidationError
from climact.common.utils import sigmoid
from climact.model.types import (AXES, THEMES, Dataset, Hyperparameters, LatentState, ModelParameters,
                                 SubredditCatalog, check_parameters, stack_observations, structure_of)


def _engagement_logdensity(E_S, E_L, params):
    return normal_logpdf(E_S, params.beta_E1 * E_L + params.beta_E0, params.theta_E)

def _participation_long_logits(D, D_sub, N_sub, E_L, params):
    logits = params.beta_PL0 + params.beta_PL2 * N_sub
    if params.beta_PL1 is not None:
        logits = logits + params.beta_PL1 * (D @ D_sub.T)
    if params.beta_PL3 is not None:
        logits = logits + params.beta_PL3 * jnp.expand_dims(E_L, -1)
    return logits

def _sympathy_mean(D, E_L, M_L, params):
    mean = jnp.zeros(jnp.shape(E_L))
    if params.beta_S1 is not None:
        mean = mean + D @ params.beta_S1
    if params.beta_S2 is not None:
        mean = mean + params.beta_S2 * E_L
    if params.beta_S3 is not None:
        mean = mean + M_L @ params.beta_S3
    return mean

def _participation_short_logits(S, P_L, D_sub, N_sub, E_S, params):
    # beta_PS1 . (S * D_sub[k]) == S * (D_sub[k] . beta_PS1)
    logits = (params.beta_PS0 + params.beta_PS2 * P_L + params.beta_PS3 * N_sub
              + jnp.expand_dims(S, -1) * (D_sub @ params.beta_PS1))
    if params.beta_PS4 is not None:
        logits = logits + params.beta_PS4 * jnp.expand_dims(E_S, -1)
    return logits

def _interaction_logits(P_S, D_sub, E_S, params):
    logits = params.beta_I0 + (P_S @ D_sub) @ params.beta_I1
    if params.beta_I2 is not None:
        logits = logits + params.beta_I2 * E_S
    return logits

def _activation_logits(S, I, M_S, M_L, E_S, params):
    logits = params.beta_A0 + params.beta_A1 * S
    if params.beta_A2 is not None:
        logits = logits + params.beta_A2 * I
    if params.beta_A3 is not None:
        logits = logits + M_S @ params.beta_A3
    if params.beta_A4 is not None:
        logits = logits + M_L @ params.beta_A4
    if params.beta_A5 is not None:
        logits = logits + params.beta_A5 * E_S
    return logits


def user_log_density(params: ModelParameters, latents: LatentState, data: Dataset, D_sub, N_sub, var_S):
    """Per-user sum of every node's log density/mass; shape (n_users,)."""
    D, S = latents
    terms = normal_logpdf(S, _sympathy_mean(D, data.E_L, data.M_L, params), var_S)
    if D is not None:
        terms = terms + jnp.sum(normal_logpdf(D, 0.0, 1.0), axis=-1)
    if params.theta_E is not None:
        terms = terms + _engagement_logdensity(data.E_S, data.E_L, params)
    terms = terms + jnp.sum(bernoulli_logpmf(
        data.P_L, _participation_long_logits(D, D_sub, N_sub, data.E_L, params)), axis=-1)
    terms = terms + jnp.sum(bernoulli_logpmf(
        data.P_S, _participation_short_logits(S, data.P_L, D_sub, N_sub, data.E_S, params)), axis=-1)
    if params.beta_I0 is not None:
        terms = terms + bernoulli_logpmf(data.I, _interaction_logits(data.P_S, D_sub, data.E_S, params))
    terms = terms + bernoulli_logpmf(data.A, _activation_logits(S, data.I, data.M_S, data.M_L, data.E_S, params))
    return terms

def parameter_log_prior(params: ModelParameters, hyper: Hyperparameters):
    total = 0.0
    for name, value in params.present().items():
        if name == 'theta_E':
            total = total + lognormal_logpdf(value, hyper.prior_mean_default, hyper.prior_var)
        else:
            total = total + jnp.sum(normal_logpdf(value, hyper.prior_mean(name), hyper.prior_var))
    return total

def _joint_log_density(params, latents, data, D_sub, N_sub, hyper):
    return jnp.sum(user_log_density(params, latents, data, D_sub, N_sub, hyper.var_S)) \
        + parameter_log_prior(params, hyper)


def _check_D(D, catalog):
    if D is not None and np.shape(D)[-1] != catalog.D_sub.shape[1]:
        raise ValidationError("D has {} axes, catalog has {}".format(np.shape(D)[-1], catalog.D_sub.shape[1]))

def _check_K(bits, catalog, name):
    if np.shape(bits)[-1] != catalog.K:
        raise ValidationError("{} has length {}, catalog has K={}".format(name, np.shape(bits)[-1], catalog.K))


def engagement_logdensity(E_S, E_L, params: ModelParameters):
    if params.theta_E is None or not float(params.theta_E) > 0:
        raise ValidationError("theta_E must be a positive variance, got {}".format(params.theta_E))
    return _engagement_logdensity(E_S, E_L, params)

def participation_long_prob(D, catalog: SubredditCatalog, E_L, params: ModelParameters):
    _check_D(D, catalog)
    return sigmoid(_participation_long_logits(D, catalog.D_sub, catalog.N_sub, E_L, params))

def sympathy_mean(D, E_L, M_L, params: ModelParameters):
    if np.shape(M_L)[-1] != len(THEMES):
        raise ValidationError("M_L must have {} themes".format(len(THEMES)))
    if D is not None and np.shape(D)[-1] != len(AXES):
        raise ValidationError("D must have {} axes".format(len(AXES)))
    return _sympathy_mean(D, E_L, M_L, params)

def participation_short_prob(S, P_L, catalog: SubredditCatalog, E_S, params: ModelParameters):
    _check_K(P_L, catalog, 'P_L')
    return sigmoid(_participation_short_logits(S, P_L, catalog.D_sub, catalog.N_sub, E_S, params))

def interaction_prob(P_S, catalog: SubredditCatalog, E_S, params: ModelParameters):
    _check_K(P_S, catalog, 'P_S')
    return sigmoid(_interaction_logits(P_S, catalog.D_sub, E_S, params))

def activation_prob(S, I, M_S, M_L, E_S, params: ModelParameters):
    return sigmoid(_activation_logits(S, I, M_S, M_L, E_S, params))


def joint_log_density(params: ModelParameters, latents: LatentState, obs, catalog: SubredditCatalog,
                      hyper: Hyperparameters = Hyperparameters()):
    """Log joint density of parameters, latents and observations of all users."""
    hyper.validate()
    structure = structure_of(params)
    check_parameters(params, structure)
    data = stack_observations(obs)
    n = data.n_users
    for name in ('P_L', 'P_S'):
        if np.shape(getattr(data, name)) != (n, catalog.K):
            raise ValidationError("{} must have shape ({}, {})".format(name, n, catalog.K))
    if np.shape(latents.S) != (n,):
        raise ValidationError("S must have one entry per user")
    if structure.has('D'):
        if latents.D is None or np.shape(latents.D) != (n, len(AXES)):
            raise ValidationError("D must have shape ({}, {})".format(n, len(AXES)))
    elif latents.D is not None:
        raise ValidationError("D is given but the D group is removed from the model")
    return _joint_log_density(params, latents, data, catalog.D_sub, catalog.N_sub, hyper)
