import jax
import jax.numpy as jnp
import numpy as np


def sigmoid(x):
  # lax.logistic branches on the sign of x, finite for |x| <= 700 in float64
  return jax.nn.sigmoid(x)

def as_key(seed):
  if isinstance(seed, (int, np.integer)):
    return jax.random.PRNGKey(int(seed))
  return seed

def pearson(x, y):
  return float(np.corrcoef(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))[0, 1])

def format_shapes(tree, depth):
  if isinstance(tree, dict):
    for key in sorted(tree):
      print("\n" + "\t" * depth + str(key), end="")
      format_shapes(tree[key], depth + 1)
  else:
    print(" : " + "x".join(str(d) for d in tree) if tree else " : scalar", end="")

def print_param(name, shapes):
  print(name, end="")
  format_shapes({k: tuple(v) if isinstance(v, tuple) else tuple(jnp.shape(v)) for k, v in shapes.items()
                 if v is not None}, 1)
  print()
