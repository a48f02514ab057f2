from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import jax.numpy as jnp
import numpy as np

from climact.common.exceptions import ValidationError

AXES = ('affluence', 'partisanship', 'gender', 'age')
THEMES = ('climate', 'climate_action', 'natural_disasters')
GROUPS = ('E', 'I', 'M', 'D')

# name -> (shape, groups whose removal deletes the parameter)
PARAMETER_SPECS = (
    ('beta_E0', (), 'E'),
    ('beta_E1', (), 'E'),
    ('theta_E', (), 'E'),
    ('beta_PL0', (), ''),
    ('beta_PL1', (), 'D'),
    ('beta_PL2', (), ''),
    ('beta_PL3', (), 'E'),
    ('beta_S1', (len(AXES),), 'D'),
    ('beta_S2', (), 'E'),
    ('beta_S3', (len(THEMES),), 'M'),
    ('beta_PS0', (), ''),
    ('beta_PS1', (len(AXES),), ''),
    ('beta_PS2', (), ''),
    ('beta_PS3', (), ''),
    ('beta_PS4', (), 'E'),
    ('beta_I0', (), 'I'),
    ('beta_I1', (len(AXES),), 'I'),
    ('beta_I2', (), 'IE'),
    ('beta_A0', (), ''),
    ('beta_A1', (), ''),
    ('beta_A2', (), 'I'),
    ('beta_A3', (len(THEMES),), 'M'),
    ('beta_A4', (len(THEMES),), 'M'),
    ('beta_A5', (), 'E'),
)
POPULARITY_PARAMETERS = ('beta_PL2', 'beta_PS3')

# target equation of every coefficient, used to group report panels
EQUATION_OF = {
    'beta_E0': 'engagement', 'beta_E1': 'engagement', 'theta_E': 'engagement',
    'beta_PL0': 'participation_long', 'beta_PL1': 'participation_long',
    'beta_PL2': 'participation_long', 'beta_PL3': 'participation_long',
    'beta_S1': 'sympathy', 'beta_S2': 'sympathy', 'beta_S3': 'sympathy',
    'beta_PS0': 'participation_short', 'beta_PS1': 'participation_short',
    'beta_PS2': 'participation_short', 'beta_PS3': 'participation_short',
    'beta_PS4': 'participation_short',
    'beta_I0': 'interaction', 'beta_I1': 'interaction', 'beta_I2': 'interaction',
    'beta_A0': 'activation', 'beta_A1': 'activation', 'beta_A2': 'activation',
    'beta_A3': 'activation', 'beta_A4': 'activation', 'beta_A5': 'activation',
}


class ModelParameters(NamedTuple):
    """Coefficients of the activation network.

    Fields of groups removed by a ModelStructure are None, which jax treats as an
    empty subtree, so ablated models flatten to fewer coordinates.
    """
    beta_E0: Optional[jnp.ndarray] = None
    beta_E1: Optional[jnp.ndarray] = None
    theta_E: Optional[jnp.ndarray] = None
    beta_PL0: Optional[jnp.ndarray] = None
    beta_PL1: Optional[jnp.ndarray] = None
    beta_PL2: Optional[jnp.ndarray] = None
    beta_PL3: Optional[jnp.ndarray] = None
    beta_S1: Optional[jnp.ndarray] = None
    beta_S2: Optional[jnp.ndarray] = None
    beta_S3: Optional[jnp.ndarray] = None
    beta_PS0: Optional[jnp.ndarray] = None
    beta_PS1: Optional[jnp.ndarray] = None
    beta_PS2: Optional[jnp.ndarray] = None
    beta_PS3: Optional[jnp.ndarray] = None
    beta_PS4: Optional[jnp.ndarray] = None
    beta_I0: Optional[jnp.ndarray] = None
    beta_I1: Optional[jnp.ndarray] = None
    beta_I2: Optional[jnp.ndarray] = None
    beta_A0: Optional[jnp.ndarray] = None
    beta_A1: Optional[jnp.ndarray] = None
    beta_A2: Optional[jnp.ndarray] = None
    beta_A3: Optional[jnp.ndarray] = None
    beta_A4: Optional[jnp.ndarray] = None
    beta_A5: Optional[jnp.ndarray] = None

    def present(self):
        return {k: v for k, v in self._asdict().items() if v is not None}

    def to_json(self):
        return {k: np.asarray(v).tolist() for k, v in self.present().items()}

    @classmethod
    def from_json(cls, values):
        unknown = set(values) - set(cls._fields)
        if unknown:
            raise ValidationError("unknown parameter names: {}".format(sorted(unknown)))
        return cls(**{k: jnp.asarray(v, dtype=jnp.float64) for k, v in values.items()})


@dataclass(frozen=True)
class ModelStructure:
    """Which variable groups (E, I, M, D) are structurally removed from the network."""
    removed: frozenset = frozenset()

    def __post_init__(self):
        unknown = set(self.removed) - set(GROUPS)
        if unknown:
            raise ValidationError("unknown ablation group(s) {}; expected a subset of {}".format(
                sorted(unknown), ','.join(GROUPS)))
        object.__setattr__(self, 'removed', frozenset(self.removed))

    @classmethod
    def without(cls, groups=()):
        if isinstance(groups, str):
            groups = [g.strip() for g in groups.split(',') if g.strip()]
        return cls(frozenset(groups))

    def has(self, group):
        return group not in self.removed

    def parameter_shapes(self):
        return {name: shape for name, shape, groups in PARAMETER_SPECS
                if not (set(groups) & self.removed)}

    def n_parameter_scalars(self):
        return int(sum(np.prod(s, dtype=int) for s in self.parameter_shapes().values()))

    @property
    def label(self):
        if not self.removed:
            return 'full'
        return 'no_' + ''.join(g for g in GROUPS if g in self.removed)


FULL_MODEL = ModelStructure()


class Hyperparameters(NamedTuple):
    var_S: float = 1.0
    prior_mean_popularity: float = 1.0
    prior_var: float = 1.0
    prior_mean_default: float = 0.0

    def validate(self):
        if not (np.isfinite(self.var_S) and self.var_S > 0):
            raise ValidationError("var_S must be a positive finite variance, got {}".format(self.var_S))
        if not (np.isfinite(self.prior_var) and self.prior_var > 0):
            raise ValidationError("prior_var must be positive, got {}".format(self.prior_var))
        if not self.prior_mean_popularity > 0:
            raise ValidationError("prior_mean_popularity must be positive, got {}".format(
                self.prior_mean_popularity))
        return self

    def prior_mean(self, name):
        if name in POPULARITY_PARAMETERS:
            return self.prior_mean_popularity
        return self.prior_mean_default


VAR_S_SWEEP = (0.01, 1.0, 100.0)


class LatentState(NamedTuple):
    D: Optional[jnp.ndarray]
    S: jnp.ndarray


@dataclass(frozen=True)
class SubredditCatalog:
    names: Tuple[str, ...]
    D_sub: np.ndarray
    N_sub: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        D_sub = np.asarray(self.D_sub, dtype=np.float64)
        N_sub = np.asarray(self.N_sub, dtype=np.float64)
        if len(names) == 0:
            raise ValidationError("catalog must contain at least one subreddit")
        if len(set(names)) != len(names):
            seen = set()
            dup = [n for n in names if n in seen or seen.add(n)]
            raise ValidationError("duplicate subreddit names: {}".format(sorted(set(dup))))
        if D_sub.ndim != 2 or D_sub.shape != (len(names), len(AXES)):
            raise ValidationError("D_sub must have shape ({}, {}), got {}".format(
                len(names), len(AXES), D_sub.shape))
        if N_sub.shape != (len(names),):
            raise ValidationError("N_sub must have length {}, got shape {}".format(len(names), N_sub.shape))
        if not np.all(np.isfinite(D_sub)) or not np.all(np.isfinite(N_sub)):
            raise ValidationError("catalog scores must be finite")
        object.__setattr__(self, 'names', names)
        object.__setattr__(self, 'D_sub', D_sub)
        object.__setattr__(self, 'N_sub', N_sub)

    @property
    def K(self):
        return len(self.names)


@dataclass(frozen=True)
class UserObservation:
    P_L: np.ndarray
    P_S: np.ndarray
    E_L: float
    E_S: float
    M_L: np.ndarray
    M_S: np.ndarray
    I: int
    A: int
    location: Optional[str] = None
    user_id: Optional[str] = None

    def validate(self, catalog):
        uid = self.user_id
        for name in ('P_L', 'P_S'):
            bits = np.asarray(getattr(self, name))
            if bits.shape != (catalog.K,):
                raise ValidationError("{} has length {}, catalog has K={}".format(
                    name, bits.size, catalog.K), user_id=uid)
            if not np.all((bits == 0) | (bits == 1)):
                raise ValidationError("{} must be a bit vector".format(name), user_id=uid)
        for name in ('M_L', 'M_S'):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.shape != (len(THEMES),) or not np.all(np.isfinite(m)):
                raise ValidationError("{} must have {} finite entries".format(name, len(THEMES)), user_id=uid)
        for name in ('I', 'A'):
            if getattr(self, name) not in (0, 1):
                raise ValidationError("{} must be 0 or 1, got {}".format(name, getattr(self, name)), user_id=uid)
        if not (np.isfinite(self.E_L) and np.isfinite(self.E_S)):
            raise ValidationError("engagement must be finite", user_id=uid)
        return self


class Dataset(NamedTuple):
    """Observations of n users stacked into arrays (one row per user)."""
    P_L: jnp.ndarray
    P_S: jnp.ndarray
    E_L: jnp.ndarray
    E_S: jnp.ndarray
    M_L: jnp.ndarray
    M_S: jnp.ndarray
    I: jnp.ndarray
    A: jnp.ndarray

    @property
    def n_users(self):
        return self.A.shape[0]

    def take(self, index):
        return Dataset(*[np.asarray(x)[index] for x in self])


def stack_observations(observations: Sequence[UserObservation]) -> Dataset:
    if isinstance(observations, Dataset):
        return observations
    if len(observations) == 0:
        raise ValidationError("no observations")
    f64 = lambda name: np.asarray([getattr(o, name) for o in observations], dtype=np.float64)
    return Dataset(P_L=f64('P_L'), P_S=f64('P_S'), E_L=f64('E_L'), E_S=f64('E_S'),
                   M_L=f64('M_L'), M_S=f64('M_S'), I=f64('I'), A=f64('A'))


def unstack_dataset(data: Dataset, user_ids=None, locations=None):
    data = Dataset(*[np.asarray(x) for x in data])
    n = data.n_users
    user_ids = user_ids if user_ids is not None else ['u{:06d}'.format(i) for i in range(n)]
    locations = locations if locations is not None else [None] * n
    return [UserObservation(P_L=data.P_L[i].astype(np.int8), P_S=data.P_S[i].astype(np.int8),
                            E_L=float(data.E_L[i]), E_S=float(data.E_S[i]),
                            M_L=data.M_L[i], M_S=data.M_S[i],
                            I=int(data.I[i]), A=int(data.A[i]),
                            location=locations[i], user_id=user_ids[i])
            for i in range(n)]


def check_parameters(params: ModelParameters, structure: ModelStructure = FULL_MODEL):
    shapes = structure.parameter_shapes()
    present = params.present()
    missing = set(shapes) - set(present)
    if missing:
        raise ValidationError("missing parameters for structure {}: {}".format(structure.label, sorted(missing)))
    for name, value in present.items():
        if name not in shapes:
            raise ValidationError("parameter {} is not part of structure {}".format(name, structure.label))
        value = np.asarray(value)
        if value.shape != shapes[name]:
            raise ValidationError("parameter {} must have shape {}, got {}".format(name, shapes[name], value.shape))
        if not np.all(np.isfinite(value)):
            raise ValidationError("parameter {} is not finite".format(name))
    if 'theta_E' in present and not float(present['theta_E']) > 0:
        raise ValidationError("theta_E must be a positive variance, got {}".format(float(present['theta_E'])))
    return params


def zeros_parameters(structure: ModelStructure = FULL_MODEL, theta_E=1.0):
    values = {name: jnp.zeros(shape, dtype=jnp.float64) for name, shape in structure.parameter_shapes().items()}
    if 'theta_E' in values:
        values['theta_E'] = jnp.asarray(theta_E, dtype=jnp.float64)
    return ModelParameters(**values)


def coefficient_labels(name, shape):
    if shape == ():
        return [name]
    labels = AXES if shape[0] == len(AXES) else THEMES
    return ['{}[{}]'.format(name, l) for l in labels]


# a group is absent from a parameter set when its marker coefficient is None
_GROUP_MARKERS = {'E': 'theta_E', 'I': 'beta_I0', 'M': 'beta_S3', 'D': 'beta_PL1'}

def structure_of(params: ModelParameters) -> ModelStructure:
    return ModelStructure(frozenset(g for g, name in _GROUP_MARKERS.items() if getattr(params, name) is None))
