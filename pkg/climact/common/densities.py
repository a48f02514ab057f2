import jax
import jax.numpy as jnp
from jax.scipy.stats import norm


def normal_logpdf(x, mean, var):
    # var is a variance, not a standard deviation
    return norm.logpdf(x, loc=mean, scale=jnp.sqrt(var))

def lognormal_logpdf(x, mean, var):
    log_x = jnp.log(x)
    return normal_logpdf(log_x, mean, var) - log_x

def bernoulli_logpmf(y, logits):
    # y*log(sigma(x)) + (1-y)*log(sigma(-x)); log_sigmoid keeps large |x| finite
    return y * jax.nn.log_sigmoid(logits) + (1.0 - y) * jax.nn.log_sigmoid(-logits)
