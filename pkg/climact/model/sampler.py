from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from climact.common.exceptions import ValidationError
from climact.common.utils import as_key, sigmoid
from climact.model.network import (_activation_logits, _interaction_logits, _participation_long_logits,
                                   _participation_short_logits, _sympathy_mean)
from climact.model.types import (AXES, THEMES, FULL_MODEL, Dataset, Hyperparameters, LatentState,
                                 ModelParameters, SubredditCatalog, check_parameters, structure_of,
                                 unstack_dataset)

MEDIA_KINDS = ('normal', 'constant', 'zeros')


class MediaGenerator(NamedTuple):
    """How synthetic media features are drawn.

    normal   -- M_L and M_S independent Normal(loc, scale^2) per theme
    constant -- media constant in time: M_S equals M_L
    zeros    -- no media signal
    """
    kind: str = 'normal'
    loc: float = 0.0
    scale: float = 1.0

    def validate(self):
        if self.kind not in MEDIA_KINDS:
            raise ValidationError("unknown media generator '{}', expected one of {}".format(self.kind, MEDIA_KINDS))
        if not (np.isfinite(self.loc) and np.isfinite(self.scale) and self.scale >= 0):
            raise ValidationError("media generator needs finite loc and non-negative scale")
        return self


def _sample_media(key, n_users, generator):
    shape = (n_users, len(THEMES))
    key_L, key_S = jax.random.split(key)
    if generator.kind == 'zeros':
        return jnp.zeros(shape), jnp.zeros(shape)
    M_L = generator.loc + generator.scale * jax.random.normal(key_L, shape)
    if generator.kind == 'constant':
        return M_L, M_L
    return M_L, generator.loc + generator.scale * jax.random.normal(key_S, shape)

def _bernoulli(key, logits):
    return jax.random.bernoulli(key, sigmoid(logits)).astype(jnp.float64)


def sample_dataset(params: ModelParameters, catalog: SubredditCatalog, hyper: Hyperparameters = Hyperparameters(),
                   n_users=1000, media_generator: MediaGenerator = MediaGenerator(), seed=0):
    """Ancestral sampling of n_users through the network; returns (Dataset, LatentState)."""
    if int(n_users) < 1:
        raise ValidationError("n_users must be at least 1")
    media_generator = MediaGenerator(*media_generator).validate()
    hyper.validate()
    check_parameters(params, structure_of(params))
    n = int(n_users)
    D_sub = jnp.asarray(catalog.D_sub); N_sub = jnp.asarray(catalog.N_sub)
    keys = jax.random.split(as_key(seed), 9)

    D = jax.random.normal(keys[0], (n, len(AXES)))
    E_L = jax.random.normal(keys[1], (n,))
    M_L, M_S = _sample_media(keys[2], n, media_generator)
    noise = jax.random.normal(keys[3], (n,))
    if params.theta_E is not None:
        E_S = params.beta_E1 * E_L + params.beta_E0 + jnp.sqrt(params.theta_E) * noise
    else:
        E_S = noise
    P_L = _bernoulli(keys[4], _participation_long_logits(D, D_sub, N_sub, E_L, params))
    S = _sympathy_mean(D, E_L, M_L, params) + jnp.sqrt(hyper.var_S) * jax.random.normal(keys[5], (n,))
    P_S = _bernoulli(keys[6], _participation_short_logits(S, P_L, D_sub, N_sub, E_S, params))
    if params.beta_I0 is not None:
        I = _bernoulli(keys[7], _interaction_logits(P_S, D_sub, E_S, params))
    else:
        I = jnp.zeros((n,))
    A = _bernoulli(keys[8], _activation_logits(S, I, M_S, M_L, E_S, params))

    data = Dataset(*[np.asarray(x, dtype=np.float64) for x in (P_L, P_S, E_L, E_S, M_L, M_S, I, A)])
    return data, LatentState(D=np.asarray(D), S=np.asarray(S))

def forward_sample(params: ModelParameters, catalog: SubredditCatalog, hyper: Hyperparameters = Hyperparameters(),
                   n_users=1000, media_generator: MediaGenerator = MediaGenerator(), seed=0):
    data, latents = sample_dataset(params, catalog, hyper, n_users, media_generator, seed)
    return unstack_dataset(data), latents


def synthetic_catalog(n_subreddits=20, seed=0):
    key_D, key_N = jax.random.split(as_key(seed))
    D_sub = np.asarray(jax.random.normal(key_D, (n_subreddits, len(AXES))))
    if n_subreddits > 1:
        D_sub = (D_sub - D_sub.mean(axis=0)) / D_sub.std(axis=0, ddof=1)
    N_sub = np.asarray(jax.random.normal(key_N, (n_subreddits,)))
    return SubredditCatalog(names=tuple('r/sub{:03d}'.format(k) for k in range(n_subreddits)),
                            D_sub=D_sub, N_sub=N_sub)

def default_parameters(structure=FULL_MODEL):
    values = dict(
        beta_E0=0.0, beta_E1=0.8, theta_E=0.25,
        beta_PL0=-1.5, beta_PL1=0.5, beta_PL2=1.0, beta_PL3=0.3,
        beta_S1=[0.5, -0.5, 0.3, -0.3], beta_S2=0.2, beta_S3=[0.3, 0.5, 0.1],
        beta_PS0=-2.0, beta_PS1=[0.2, -0.2, 0.1, 0.1], beta_PS2=2.0, beta_PS3=0.5, beta_PS4=0.3,
        beta_I0=-1.0, beta_I1=[0.3, -0.3, 0.2, 0.1], beta_I2=0.5,
        beta_A0=-0.5, beta_A1=1.0, beta_A2=1.0, beta_A3=[0.2, 0.5, 0.1], beta_A4=[0.1, 0.2, 0.0], beta_A5=0.3,
    )
    shapes = structure.parameter_shapes()
    return ModelParameters(**{k: jnp.asarray(v, dtype=jnp.float64) for k, v in values.items() if k in shapes})
