import argparse
import glob
import json
import os
import sys

import pandas as pd

from climact.common.base_classes import write_manifest
from climact.common.exceptions import InferenceError, ValidationError
from climact.data.ingestion import load_dataset, read_catalog, save_dataset
from climact.experiments.ablation import run_ablation
from climact.experiments.diagnostics import engagement_correlations, engagement_joint
from climact.experiments.report import report
from climact.experiments.robustness import load_robustness, run_robustness, save_robustness
from climact.model.sampler import MEDIA_KINDS, MediaGenerator, default_parameters, forward_sample, synthetic_catalog
from climact.model.types import GROUPS, VAR_S_SWEEP, Hyperparameters, ModelParameters, ModelStructure, structure_of
from climact.SVI.base_class import FitConfig, FitResult
from climact.SVI.svi import fit

DATA_FILES = ('catalog.csv', 'users.csv', 'media.csv', 'interactions.csv', 'locations.csv')
_FIT = FitConfig()


def _float_list(value):
    try:
        return [float(v) for v in str(value).split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma separated list of numbers, got {!r}".format(value))

def read_config(path):
    """key = value lines, '#' comments; keys use flag names with '-' or '_'."""
    if not os.path.exists(path):
        raise ValidationError("config file not found", path=path)
    config = {}
    with open(path, encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ValidationError("expected key = value", path=path, line=line_no)
            key, value = (s.strip() for s in line.split('=', 1))
            value = value.strip('"\'')
            if value.lower() in ('true', 'false'):
                value = value.lower() == 'true'
            config[key.replace('-', '_')] = value
    return config


def _add_fit_arguments(parser, var_S_default):
    parser.add_argument('--data', type=str, default=None, help='directory with catalog.csv and users.csv')
    parser.add_argument('--var-s', dest='var_s', type=_float_list, default=var_S_default, help='var(S) values')
    parser.add_argument('--restarts', type=int, default=_FIT.n_restarts, help='random restarts')
    parser.add_argument('--steps', type=int, default=_FIT.n_steps, help='max optimization steps per restart')
    parser.add_argument('--lr', type=float, default=_FIT.learning_rate, help='learning rate')
    parser.add_argument('--optimizer', type=str, default=_FIT.optimizer, help='adam or adam_clip')
    parser.add_argument('--mc-samples', dest='mc_samples', type=int, default=_FIT.mc_samples_per_step,
                        help='ELBO samples per step')
    parser.add_argument('--predictive-samples', dest='predictive_samples', type=int,
                        default=_FIT.n_predictive_samples, help='posterior predictive draws')
    parser.add_argument('--minibatch', type=float, default=_FIT.minibatch_fraction, help='user fraction per step')
    parser.add_argument('--early-stop-tol', dest='early_stop_tol', type=float, default=_FIT.early_stop_tol,
                        help='relative ELBO improvement per window below which a restart stops')
    parser.add_argument('--no-gap', dest='no_gap', action='store_true', help='long-term window ends at t_A - 1 week')
    parser.add_argument('--tensorboard', type=str, default=None, help='tensorboard log dir')

def build_parser():
    parser = argparse.ArgumentParser(prog='climact')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='key = value file mirroring the flags')
    common.add_argument('--seed', type=int, default=0, help='random seed')
    common.add_argument('--verbose', type=int, default=1, help='verbose')
    common.add_argument('--out', type=str, default=None, help='output directory')
    sub = parser.add_subparsers(dest='command', required=True)
    commands = {}

    p = commands['simulate'] = sub.add_parser('simulate', parents=[common], help='forward-sample a dataset')
    p.add_argument('--params', type=str, default=None, help='JSON file of coefficients (default ground truth)')
    p.add_argument('--catalog', type=str, default=None, help='catalog.csv (default synthetic)')
    p.add_argument('--n-users', dest='n_users', type=int, default=1000, help='users')
    p.add_argument('--n-subreddits', dest='n_subreddits', type=int, default=20, help='synthetic catalog size')
    p.add_argument('--var-s', dest='var_s', type=float, default=Hyperparameters().var_S, help='var(S)')
    p.add_argument('--media-kind', dest='media_kind', type=str, default='normal', choices=MEDIA_KINDS)
    p.add_argument('--remove', type=str, default='', help='groups removed from the default parameters, e.g. E,I')

    p = commands['fit'] = sub.add_parser('fit', parents=[common], help='fit the network by SVI')
    _add_fit_arguments(p, list(VAR_S_SWEEP))
    p.add_argument('--remove', type=str, default='', help='groups removed from the network, e.g. E,I')

    p = commands['ablate'] = sub.add_parser('ablate', parents=[common], help='refit with variable groups removed')
    _add_fit_arguments(p, list(VAR_S_SWEEP))
    p.add_argument('--groups', type=str, default=','.join(GROUPS), help='groups to remove one at a time')

    p = commands['robustness'] = sub.add_parser('robustness', parents=[common],
                                                help='compare fits with and without the pre-activation gap')
    _add_fit_arguments(p, [Hyperparameters().var_S])

    p = commands['report'] = sub.add_parser('report', parents=[common], help='tables and figures from fits')
    p.add_argument('--in', dest='in_dir', type=str, default=None, help='directory with fit_*.json')
    p.add_argument('--data', type=str, default=None, help='data directory for the engagement correlation table')
    return parser, commands

def parse_args(argv=None):
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = read_config(args.config)
        unknown = sorted(set(config) - set(vars(args)) - {'command'})
        if unknown:
            raise ValidationError("unknown config keys {}".format(unknown), path=args.config)
        config.pop('command', None)
        # explicit flags still win over set_defaults
        commands[args.command].set_defaults(**config)
        args = parser.parse_args(argv)
    required = {'out': '--out', 'data': '--data', 'in_dir': '--in'}
    for dest, flag in required.items():
        if dest in vars(args) and getattr(args, dest) is None and not (dest == 'data' and args.command == 'report'):
            raise ValidationError("{} {} needs {}".format(parser.prog, args.command, flag))
    return args


def _fit_config(args, var_S=None):
    return FitConfig(learning_rate=args.lr, n_restarts=args.restarts, n_steps=args.steps,
                     mc_samples_per_step=args.mc_samples, n_predictive_samples=args.predictive_samples,
                     seed=args.seed, var_S=var_S, early_stop_tol=args.early_stop_tol,
                     minibatch_fraction=args.minibatch, optimizer=args.optimizer).validate()

def _data_files(data_dir):
    return {name: os.path.join(data_dir, name) for name in DATA_FILES if os.path.exists(os.path.join(data_dir, name))}

def _load(data_dir, gap_enabled=True, verbose=0):
    files = _data_files(data_dir)
    for name in ('catalog.csv', 'users.csv'):
        if name not in files:
            raise ValidationError("missing {}".format(name), path=data_dir)
    loaded = load_dataset(files['catalog.csv'], files['users.csv'], files.get('media.csv'),
                          files.get('interactions.csv'), files.get('locations.csv'), gap_enabled, verbose)
    for message in loaded.diagnostics:
        print("warning : " + message, file=sys.stderr)
    return loaded

def _fit_name(var_S, label=None):
    return "fit_varS_{:g}.json".format(var_S) if label is None else "fit_{}_varS_{:g}.json".format(label, var_S)

def _manifest(args, inputs):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ('seed', 'command')}
    write_manifest(args.out, args.command, config, args.seed, inputs)


def simulate(args):
    if args.params is not None:
        try:
            with open(args.params) as f:
                params = ModelParameters.from_json(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError("cannot read parameters: {}".format(e), path=args.params)
    else:
        params = default_parameters(ModelStructure.without(args.remove))
    catalog = read_catalog(args.catalog) if args.catalog else synthetic_catalog(args.n_subreddits, args.seed)
    hyper = Hyperparameters(var_S=args.var_s)
    observations, latents = forward_sample(params, catalog, hyper, args.n_users, MediaGenerator(args.media_kind),
                                           args.seed)
    save_dataset(args.out, catalog, observations)
    with open(os.path.join(args.out, 'truth.json'), 'w') as f:
        json.dump({'var_S': args.var_s, 'structure': sorted(structure_of(params).removed),
                   'parameters': params.to_json()}, f, indent=1, sort_keys=True)
    if args.verbose:
        print("simulated {} users over {} subreddits, activation rate {:.3f}".format(
            len(observations), catalog.K, sum(o.A for o in observations) / len(observations)))
    _manifest(args, [p for p in (args.params, args.catalog) if p])

def fit_command(args):
    loaded = _load(args.data, not args.no_gap, args.verbose)
    structure = ModelStructure.without(args.remove)
    label = None if structure.label == 'full' else structure.label
    os.makedirs(args.out, exist_ok=True)
    for var_S in args.var_s:
        result = fit(loaded.observations, loaded.catalog, config=_fit_config(args, var_S), structure=structure,
                     tensorboard_log=args.tensorboard, verbose=args.verbose)
        result.save_json(os.path.join(args.out, _fit_name(var_S, label)))
    _manifest(args, _data_files(args.data).values())

def ablate(args):
    loaded = _load(args.data, not args.no_gap, args.verbose)
    result = run_ablation(loaded.observations, loaded.catalog, _fit_config(args), args.groups, args.var_s,
                          tensorboard_log=args.tensorboard, verbose=args.verbose)
    os.makedirs(args.out, exist_ok=True)
    for (label, var_S), fit_result in sorted(result.fits.items()):
        fit_result.save_json(os.path.join(args.out, _fit_name(var_S, None if label == 'full' else label)))
    result.table.to_csv(os.path.join(args.out, 'ablation.csv'), index=False, float_format='%.17g')
    _manifest(args, _data_files(args.data).values())

def robustness(args):
    gap = _load(args.data, True, args.verbose)
    no_gap = _load(args.data, False, 0)
    os.makedirs(args.out, exist_ok=True)
    for var_S in args.var_s:
        result = run_robustness(gap.observations, no_gap.observations, gap.catalog, _fit_config(args, var_S),
                                tensorboard_log=args.tensorboard, verbose=args.verbose)
        save_robustness(args.out, result.summary(), len(args.var_s))
        result.fit_gap.save_json(os.path.join(args.out, _fit_name(var_S, 'gap')))
        result.fit_no_gap.save_json(os.path.join(args.out, _fit_name(var_S, 'no_gap')))
    _manifest(args, _data_files(args.data).values())

def report_command(args):
    # full-model fits first, then the gap fits a robustness run leaves behind
    for pattern in ('fit_varS_*.json', 'fit_gap_varS_*.json', 'fit_*.json'):
        paths = sorted(glob.glob(os.path.join(args.in_dir, pattern)))
        if paths:
            break
    if not paths:
        raise ValidationError("no fit_*.json results", path=args.in_dir)
    fits = sorted((FitResult.load_json(p) for p in paths), key=lambda r: r.var_S)
    ablation_path = os.path.join(args.in_dir, 'ablation.csv')
    ablation_table = pd.read_csv(ablation_path) if os.path.exists(ablation_path) else None
    robustness_summaries = load_robustness(args.in_dir)
    engagement = joint = None
    if args.data is not None:
        loaded = _load(args.data, verbose=0)
        engagement = engagement_correlations(loaded.observations, loaded.catalog)
        joint = engagement_joint(loaded.observations, loaded.catalog)
    written = report(fits, args.out, ablation_table, engagement, robustness_summaries or None, joint)
    if args.verbose:
        for path in written:
            print("wrote " + path)
    inputs = paths + ([ablation_path] if ablation_table is not None else [])
    _manifest(args, inputs + (list(_data_files(args.data).values()) if args.data else []))

RUNNERS = {'simulate': simulate, 'fit': fit_command, 'ablate': ablate, 'robustness': robustness,
           'report': report_command}


def main(argv=None):
    try:
        args = parse_args(argv)
        RUNNERS[args.command](args)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    except ValidationError as e:
        print("error : {}".format(e), file=sys.stderr)
        return 1
    except InferenceError as e:
        print("inference failed : {}".format(e), file=sys.stderr)
        return 2
    return 0

if __name__ == "__main__":
    sys.exit(main())
