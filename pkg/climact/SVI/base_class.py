import json
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import haiku as hk
import jax
import jax.numpy as jnp
import numpy as np

from tqdm.auto import trange

from climact.common.base_classes import TensorboardWriter, save, select_optimizer
from climact.common.exceptions import InferenceError, ValidationError
from climact.common.utils import print_param
from climact.model.types import (FULL_MODEL, Hyperparameters, ModelStructure, SubredditCatalog,
                                 stack_observations)
from climact.SVI.guide import (CoefficientSummary, GuideState, init_guide, summarize_guide,
                               unconstrained_shapes)


class FitConfig(NamedTuple):
    learning_rate: float = 0.05
    n_restarts: int = 10
    n_steps: int = 5000
    mc_samples_per_step: int = 1
    n_predictive_samples: int = 100
    seed: int = 0
    var_S: Optional[float] = None  # overrides Hyperparameters.var_S when set
    init_variance: float = 0.1
    early_stop_tol: float = 1e-3
    early_stop_window: int = 100
    minibatch_fraction: float = 1.0
    optimizer: str = 'adam'
    log_interval: int = 100

    def validate(self):
        for name in ('n_restarts', 'n_steps', 'mc_samples_per_step', 'n_predictive_samples', 'early_stop_window',
                     'log_interval'):
            if int(getattr(self, name)) < 1:
                raise ValidationError("{} must be at least 1, got {}".format(name, getattr(self, name)))
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive, got {}".format(self.learning_rate))
        if not 0.0 < self.minibatch_fraction <= 1.0:
            raise ValidationError("minibatch_fraction must lie in (0, 1], got {}".format(self.minibatch_fraction))
        if not self.init_variance > 0:
            raise ValidationError("init_variance must be positive")
        if self.var_S is not None and not self.var_S > 0:
            raise ValidationError("var_S must be positive, got {}".format(self.var_S))
        if self.optimizer not in ('adam', 'adam_clip'):
            raise ValidationError("unknown optimizer '{}', expected 'adam' or 'adam_clip'".format(self.optimizer))
        return self


class RestartRecord(NamedTuple):
    restart: int
    elbo: float
    accuracy: float
    accuracy_sd: float
    diverged: bool
    steps: int

    def to_json(self):
        # non-finite values (diverged restarts) are written as null
        return {"restart": int(self.restart), "elbo": _finite_or_none(self.elbo),
                "accuracy": _finite_or_none(self.accuracy), "accuracy_sd": _finite_or_none(self.accuracy_sd),
                "diverged": bool(self.diverged), "steps": int(self.steps)}

    @classmethod
    def from_json(cls, raw):
        nan_if_none = lambda v: float('nan') if v is None else float(v)
        return cls(int(raw["restart"]), nan_if_none(raw["elbo"]), nan_if_none(raw["accuracy"]),
                   nan_if_none(raw["accuracy_sd"]), bool(raw["diverged"]), int(raw["steps"]))


def _finite_or_none(x):
    x = float(x)
    return x if np.isfinite(x) else None


@dataclass
class FitResult:
    best_guide: Optional[GuideState]
    restarts: List[RestartRecord]
    parameters: List[CoefficientSummary]
    elbo_trace: np.ndarray
    best_restart: int
    var_S: float
    structure: ModelStructure
    accuracy_samples: np.ndarray
    sympathy_mean: np.ndarray
    activations: np.ndarray

    @property
    def accuracy(self):
        return self.restarts[self.best_restart].accuracy

    def coefficient(self, name):
        for summary in self.parameters:
            if summary.name == name:
                return summary
        raise KeyError(name)

    def to_json(self):
        return {
            "var_S": float(self.var_S),
            "structure": sorted(self.structure.removed),
            "parameters": [s._asdict() for s in self.parameters],
            "restarts": [r.to_json() for r in self.restarts],
            "best_restart": int(self.best_restart),
            "elbo_trace": [float(x) for x in self.elbo_trace],
            "accuracy_samples": [float(x) for x in self.accuracy_samples],
            "sympathy": {"mean": [float(x) for x in self.sympathy_mean],
                         "A": [int(a) for a in self.activations]},
        }

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1, allow_nan=False)

    @classmethod
    def load_json(cls, path):
        with open(path) as f:
            raw = json.load(f)
        return cls(best_guide=None,
                   restarts=[RestartRecord.from_json(r) for r in raw["restarts"]],
                   parameters=[CoefficientSummary(**p) for p in raw["parameters"]],
                   elbo_trace=np.asarray(raw["elbo_trace"]),
                   best_restart=raw["best_restart"],
                   var_S=raw["var_S"],
                   structure=ModelStructure(frozenset(raw["structure"])),
                   accuracy_samples=np.asarray(raw["accuracy_samples"]),
                   sympathy_mean=np.asarray(raw["sympathy"]["mean"]),
                   activations=np.asarray(raw["sympathy"]["A"]))


class SVI_Family(object):
    def __init__(self, data, catalog: SubredditCatalog, hyper=Hyperparameters(), config=FitConfig(),
                 structure: ModelStructure = FULL_MODEL, tensorboard_log=None, verbose=1):
        self.catalog = catalog
        self.config = config.validate()
        if config.var_S is not None:
            hyper = hyper._replace(var_S=float(config.var_S))
        self.hyper = hyper.validate()
        self.structure = structure
        self.tensorboard_log = tensorboard_log
        self.verbose = verbose
        self.seed = int(config.seed)
        self.learning_rate = config.learning_rate
        self.optimizer = select_optimizer(config.optimizer, self.learning_rate)
        self.summary = None
        self.save_path = None

        self.data = stack_observations(data)
        self.get_data_setup()

    def get_data_setup(self):
        data = self.data
        n, K = data.n_users, self.catalog.K
        for name in ('P_L', 'P_S'):
            if np.shape(getattr(data, name)) != (n, K):
                raise ValidationError("{} must have shape ({}, {}), got {}".format(
                    name, n, K, np.shape(getattr(data, name))))
        if n < 2:
            raise ValidationError("fitting needs at least 2 users, got {}".format(n))
        A = np.asarray(data.A)
        if not (np.any(A == 1) and np.any(A == 0)):
            raise ValidationError("fitting needs at least one activated and one non-activated user")
        self.n_users = n
        self.minibatch_size = max(1, int(round(self.config.minibatch_fraction * n)))
        self.data_arrays = jax.tree_util.tree_map(jnp.asarray, data)
        self.D_sub = jnp.asarray(self.catalog.D_sub)
        self.N_sub = jnp.asarray(self.catalog.N_sub)
        if self.verbose:
            print("----------------------data-----------------------")
            print("users : ", n)
            print("subreddits : ", K)
            print("activation rate : {:.3f}".format(A.mean()))
            print("structure : ", self.structure.label)
            print("var_S : ", self.hyper.var_S)
            print("-------------------------------------------------")

    def setup_model(self):
        pass

    def _train_step(self, guide, opt_state, key, data, D_sub, N_sub, hyper):
        pass

    def _predictive_accuracies(self, guide, key, data):
        pass

    def print_model(self):
        shapes = unconstrained_shapes(self.structure, self.n_users)
        print("----------------------model----------------------")
        print_param('guide', shapes)
        print("guide coordinates : ", 2 * sum(int(np.prod(s, dtype=int)) for s in shapes.values()))
        print("-------------------------------------------------")

    def discription(self, restart, trace):
        return "restart : {}, elbo : {:.3f} |".format(restart, np.mean(trace[-self.config.log_interval:]))

    def _converged(self, trace):
        window, tol = self.config.early_stop_window, self.config.early_stop_tol
        if tol <= 0 or len(trace) < 2 * window or len(trace) % window:
            return False
        current = np.mean(trace[-window:])
        previous = np.mean(trace[-2 * window:-window])
        return (current - previous) < tol * abs(previous)

    def run_restart(self, restart):
        key_seq = hk.PRNGSequence(jax.random.fold_in(jax.random.PRNGKey(self.seed), restart))
        guide = init_guide(next(key_seq), self.structure, self.n_users, self.config.init_variance)
        opt_state = self.optimizer.init(guide)
        trace = []
        diverged = False
        pbar = trange(self.config.n_steps, miniters=self.config.log_interval, disable=not self.verbose)
        for steps in pbar:
            new_guide, opt_state, elbo = self._train_step(guide, opt_state, next(key_seq), self.data_arrays,
                                                          self.D_sub, self.N_sub, self.hyper)
            elbo = float(elbo)
            if not np.isfinite(elbo) or not all(np.all(np.isfinite(x)) for x in jax.tree_util.tree_leaves(new_guide)):
                diverged = True
                break
            guide = new_guide
            trace.append(elbo)
            if self.summary:
                self.summary.add_scalar("elbo/restart_{}".format(restart), elbo, steps)
            if steps % self.config.log_interval == 0:
                pbar.set_description(self.discription(restart, trace))
            if self._converged(trace):
                break
        pbar.close()

        final_elbo = float(np.mean(trace[-self.config.early_stop_window:])) if trace else float('nan')
        if diverged:
            record = RestartRecord(restart, final_elbo, float('nan'), float('nan'), True, len(trace))
            return guide, np.asarray(trace), record, np.zeros((0,))
        accuracies = np.asarray(self._predictive_accuracies(guide, next(key_seq), self.data_arrays))
        record = RestartRecord(restart, final_elbo, float(accuracies.mean()), float(accuracies.std()), False,
                               len(trace))
        if self.summary:
            self.summary.add_scalar("accuracy/restart", record.accuracy, restart)
        return guide, np.asarray(trace), record, accuracies

    def learn(self, tb_log_name=None):
        if tb_log_name is None:
            tb_log_name = "{}_varS_{:g}".format(self.structure.label, self.hyper.var_S)
        records, guides, traces, accuracies = [], [], [], []
        with TensorboardWriter(self.tensorboard_log, tb_log_name) as (self.summary, self.save_path):
            for restart in range(self.config.n_restarts):
                guide, trace, record, acc = self.run_restart(restart)
                records.append(record); guides.append(guide); traces.append(trace); accuracies.append(acc)
                if self.verbose:
                    print("restart {} : elbo {:.3f}, accuracy {:.4f}{}".format(
                        restart, record.elbo, record.accuracy, " (diverged)" if record.diverged else ""))

            candidates = [r for r in records if not r.diverged]
            if not candidates:
                raise InferenceError("all {} restarts diverged".format(len(records)), diagnostics=records)
            best = max(candidates, key=lambda r: (r.accuracy, r.elbo)).restart
            best_guide = guides[best]
            if self.save_path is not None:
                save(self.save_path, best_guide)

        return FitResult(best_guide=best_guide,
                         restarts=records,
                         parameters=summarize_guide(best_guide, self.structure),
                         elbo_trace=traces[best],
                         best_restart=best,
                         var_S=float(self.hyper.var_S),
                         structure=self.structure,
                         accuracy_samples=accuracies[best],
                         sympathy_mean=np.asarray(best_guide.loc['S']),
                         activations=np.asarray(self.data.A).astype(int))
