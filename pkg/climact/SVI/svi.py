import jax
import jax.numpy as jnp
import numpy as np
import optax

from jax.flatten_util import ravel_pytree

from climact.common.base_classes import select_optimizer
from climact.common.exceptions import NonFiniteGradientError, ValidationError
from climact.common.utils import as_key, sigmoid
from climact.model.network import _activation_logits, parameter_log_prior, user_log_density
from climact.model.types import FULL_MODEL, Dataset, Hyperparameters, SubredditCatalog, stack_observations
from climact.SVI.base_class import FitConfig, FitResult, SVI_Family
from climact.SVI.guide import (GuideState, coordinate_names, guide_log_prob, reparameterize, split_sample,
                               standard_normal_like)


def model_log_joint(data: Dataset, D_sub, N_sub, hyper: Hyperparameters, user_weights=None):
    """Log joint in unconstrained space (includes the log|Jacobian| of theta_E)."""
    def log_joint(z):
        params, latents, log_jacobian = split_sample(z)
        user_terms = user_log_density(params, latents, data, D_sub, N_sub, hyper.var_S)
        if user_weights is not None:
            user_terms = user_weights * user_terms
        return jnp.sum(user_terms) + parameter_log_prior(params, hyper) + log_jacobian
    return log_joint

def mc_elbo_samples(log_joint, guide: GuideState, key, n_samples, user_weights=None):
    """Per-draw log p(z) - log q(z) with z = loc + exp(log_scale) * eps."""
    eps = standard_normal_like(guide, key, n_samples)

    def single(e):
        z = reparameterize(guide, e)
        return log_joint(z) - guide_log_prob(guide, z, user_weights)
    return jax.vmap(single)(eps)

def _elbo(guide, key, data, D_sub, N_sub, hyper, n_samples, user_weights=None):
    log_joint = model_log_joint(data, D_sub, N_sub, hyper, user_weights)
    return jnp.mean(mc_elbo_samples(log_joint, guide, key, n_samples, user_weights))

def _predictive_accuracies(guide, key, data, n_samples):
    key_z, key_A = jax.random.split(key)
    eps = standard_normal_like(guide, key_z, n_samples)

    def single(e, k):
        params, latents, _ = split_sample(reparameterize(guide, e))
        logits = _activation_logits(latents.S, data.I, data.M_S, data.M_L, data.E_S, params)
        A = jax.random.bernoulli(k, sigmoid(logits)).astype(data.A.dtype)
        return jnp.mean(A == data.A)
    return jax.vmap(single)(eps, jax.random.split(key_A, n_samples))

_elbo_samples_jit = jax.jit(
    lambda guide, key, data, D_sub, N_sub, hyper, n_samples:
        mc_elbo_samples(model_log_joint(data, D_sub, N_sub, hyper), guide, key, n_samples),
    static_argnums=6)
_elbo_grad_jit = jax.jit(jax.grad(_elbo), static_argnums=6)
_predictive_jit = jax.jit(_predictive_accuracies, static_argnums=3)


def _prepare(guide, data, catalog: SubredditCatalog):
    data = jax.tree_util.tree_map(jnp.asarray, stack_observations(data))
    n = data.A.shape[0]
    if data.P_L.shape != (n, catalog.K) or data.P_S.shape != (n, catalog.K):
        raise ValidationError("participation vectors must have length K={}".format(catalog.K))
    if np.shape(guide.loc['S']) != (n,):
        raise ValidationError("guide covers {} users, data has {}".format(np.shape(guide.loc['S'])[0], n))
    return data, jnp.asarray(catalog.D_sub), jnp.asarray(catalog.N_sub)

def elbo_samples(guide: GuideState, data, catalog: SubredditCatalog, hyper=Hyperparameters(), n_samples=1, seed=0):
    data, D_sub, N_sub = _prepare(guide, data, catalog)
    return np.asarray(_elbo_samples_jit(guide, as_key(seed), data, D_sub, N_sub, hyper.validate(), int(n_samples)))

def elbo_estimate(guide: GuideState, data, catalog: SubredditCatalog, hyper=Hyperparameters(), n_samples=1, seed=0):
    """Monte-Carlo ELBO; a non-finite value means the guide diverged."""
    return float(np.mean(elbo_samples(guide, data, catalog, hyper, n_samples, seed)))

def elbo_gradient(guide: GuideState, data, catalog: SubredditCatalog, hyper=Hyperparameters(), n_samples=1, seed=0):
    """Reparameterization gradient as a flat vector in ``ravel_pytree(guide)`` order.

    Uses the same noise as ``elbo_estimate`` with the same seed.
    """
    data, D_sub, N_sub = _prepare(guide, data, catalog)
    grad = _elbo_grad_jit(guide, as_key(seed), data, D_sub, N_sub, hyper.validate(), int(n_samples))
    flat, _ = ravel_pytree(grad)
    flat = np.asarray(flat)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise NonFiniteGradientError(int(bad[0]), coordinate_names(guide)[bad[0]])
    return flat

def adam_step(params, opt_state, grad, learning_rate):
    """One Adam update ascending the objective; returns (params, opt_state).

    opt_state comes from ``select_optimizer('adam', learning_rate).init(params)`` and
    carries the step count used for bias correction.
    """
    optimizer = select_optimizer('adam', learning_rate)
    updates, opt_state = optimizer.update(jax.tree_util.tree_map(jnp.negative, grad), opt_state, params)
    return optax.apply_updates(params, updates), opt_state

def posterior_predictive_draws(guide: GuideState, data, catalog: SubredditCatalog, n_samples=100, seed=0):
    data, _, _ = _prepare(guide, data, catalog)
    return np.asarray(_predictive_jit(guide, as_key(seed), data, int(n_samples)))

def posterior_predictive_accuracy(guide: GuideState, data, catalog: SubredditCatalog, hyper=Hyperparameters(),
                                  n_samples=100, seed=0):
    """Mean over guide draws of the fraction of users whose resampled A matches the observed A.

    hyper is unused: A depends on the guide draws only.
    """
    return float(np.mean(posterior_predictive_draws(guide, data, catalog, n_samples, seed)))


class SVI(SVI_Family):
    def __init__(self, data, catalog, hyper=Hyperparameters(), config=FitConfig(), structure=FULL_MODEL,
                 tensorboard_log=None, verbose=1):
        super(SVI, self).__init__(data, catalog, hyper, config, structure, tensorboard_log, verbose)
        self.setup_model()

    def setup_model(self):
        if self.verbose:
            self.print_model()
        self._train_step = jax.jit(self._train_step)
        self._predictive_accuracies = jax.jit(self._predictive_accuracies)

    def _user_weights(self, key):
        n, m = self.n_users, self.minibatch_size
        if m >= n:
            return None
        idx = jax.random.choice(key, n, (m,), replace=False)
        return jnp.zeros((n,)).at[idx].set(n / m)

    def _train_step(self, guide, opt_state, key, data, D_sub, N_sub, hyper):
        key_eps, key_batch = jax.random.split(key)
        user_weights = self._user_weights(key_batch)
        elbo, grad = jax.value_and_grad(_elbo)(guide, key_eps, data, D_sub, N_sub, hyper,
                                               self.config.mc_samples_per_step, user_weights)
        updates, opt_state = self.optimizer.update(jax.tree_util.tree_map(jnp.negative, grad), opt_state, guide)
        guide = optax.apply_updates(guide, updates)
        return guide, opt_state, elbo

    def _predictive_accuracies(self, guide, key, data):
        return _predictive_accuracies(guide, key, data, self.config.n_predictive_samples)


def fit(data, catalog: SubredditCatalog, hyper=Hyperparameters(), config=FitConfig(), structure=FULL_MODEL,
        tensorboard_log=None, verbose=1) -> FitResult:
    """Run config.n_restarts SVI restarts and keep the one with the best posterior predictive accuracy."""
    return SVI(data, catalog, hyper, config, structure, tensorboard_log, verbose).learn()
