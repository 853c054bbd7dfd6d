# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers

Command line surface::

    torchqgml <command> [--config FILE] [--set key=value ...] [--run DIR]

Commands: generate, train, sample, evaluate, plot, gradcheck. Outputs go to
the run directory (relative names are resolved under ``$TORCHQGML_RUNS``).
"""

import argparse
import sys

from os.path import exists, join

from torch import Generator, float64, full, no_grad, randn, stack, zeros
from tqdm.autonotebook import tqdm

from .autodiff import grad_check, grad_check_parameters, ops
from .bayes import PosteriorEnsemble, FlatParameters, map_estimate, \
    sample_chain
from .dynamics import PhysicalParams, rollout
from .evaluation import MetricSeries, VorticityHistogram, baseline_variants, \
    evaluate_cases, plot_histogram, plot_history, plot_metrics
from .exceptions import ConfigError, FileFormatError, IntegrationBlowupError, \
    SamplerDivergedError, TrainingDivergedError, WrongArgumentsError
from .models import CNNClosure, QGModel
from .utils import TrainHistory, Trainer, TrajectoryMSELoss, build_model, \
    generate_data, get_run_dir, load_config, read_checkpoint, read_dataset, \
    write_checkpoint, write_manifest
from .utils.datasets import truth_params

COMMANDS = ('generate', 'train', 'sample', 'evaluate', 'plot', 'gradcheck')
GRADCHECK_TOLERANCE = 1e-4
EXIT_USAGE = 2


class UsageError(Exception):
    def __init__(self, message):
        super().__init__(message)


def log(message):
    tqdm.write(message, file=sys.stderr)


def _require(path, hint):
    if not exists(path):
        raise UsageError('Missing {} ({}).'.format(path, hint))
    return path


def _load_model(run_dir, config):
    """Coarse model of the trained checkpoint of `run_dir`."""
    checkpoint = read_checkpoint(_require(join(run_dir, 'checkpoint.dcnn'),
                                          'run `train` first'))
    dataset = read_dataset(_require(join(run_dir, 'train.dqgd'),
                                    'run `generate` first'))
    physics = config.physics
    params = PhysicalParams(nx=dataset.nx, ny=dataset.ny,
                            domain_length=dataset.domain_length,
                            dt=dataset.dt, beta=physics.beta, rek=physics.rek,
                            rd=physics.rd, delta=checkpoint.delta,
                            U1=checkpoint.U1, U2=physics.U2,
                            effective_beta=physics.effective_beta)
    return QGModel(params, checkpoint.closure), dataset


def cmd_generate(config, run_dir, verbose):
    datasets = generate_data(config, out_dir=run_dir, verbose=verbose)
    for name, dataset in datasets.items():
        if dataset is not None:
            log('{}: {} trajectories of {} observations'.format(
                name, len(dataset), dataset.n_obs))


def cmd_train(config, run_dir, verbose):
    dataset = read_dataset(_require(join(run_dir, 'train.dqgd'),
                                    'run `generate` first'))
    train_config = config.train
    train_set, val_set = dataset.split(1 - train_config.val_share,
                                       seed=train_config.seed)
    model = build_model(train_set, train_config, config.physics)
    trainer = Trainer(model, train_set, train_config, val_set)
    history = trainer.run(verbose=verbose)

    write_checkpoint(join(run_dir, 'checkpoint.dcnn'), model)
    history.to_csv(join(run_dir, 'history.csv'))
    plot_history(history, join(run_dir, 'history.svg'))
    config.save(join(run_dir, 'config.cfg'))
    theta = model.params.theta_phy()
    write_manifest(run_dir, config, {'checkpoint': 'checkpoint.dcnn',
                                     'history': 'history.csv'},
                   train_seed=train_config.seed,
                   skipped_batches=trainer.n_skipped)
    log('trained: delta={:.5g}, U1={:.5g}'.format(theta['delta'],
                                                  theta['U1']))


def cmd_sample(config, run_dir, verbose):
    model, dataset = _load_model(run_dir, config)
    ensemble = sample_chain(model, dataset, config.sampler, verbose=verbose)
    ensemble.save(join(run_dir, 'ensemble.dpen'))
    ensemble.to_csv(join(run_dir, 'chain.csv'))
    config.save(join(run_dir, 'config.cfg'))
    write_manifest(run_dir, config, {'ensemble': 'ensemble.dpen',
                                     'chain': 'chain.csv'},
                   sampler_seed=config.sampler.seed,
                   rejected_steps=ensemble.n_rejected)
    log('sampled: {} retained samples, {} rejected steps'.format(
        len(ensemble), ensemble.n_rejected))


def cmd_evaluate(config, run_dir, verbose):
    model, _ = _load_model(run_dir, config)
    eval_set = read_dataset(_require(join(run_dir, 'eval.dqgd'),
                                     'run `generate` with test simulations'))
    evaluation = config.evaluation
    if evaluation.cadence % eval_set.k:
        raise ConfigError('The evaluation cadence ({}) must be a multiple of '
                          'the observation interval ({}).'.format(
                              evaluation.cadence, eval_set.k))
    stride = evaluation.cadence // eval_set.k
    truth = eval_set.states[:, ::stride]

    reference = truth_params(config, nx=eval_set.nx)
    variants = baseline_variants(reference, evaluation.smagorinsky_constant)
    variants['deterministic'] = model

    ensemble, posterior_model = None, None
    ensemble_path = join(run_dir, 'ensemble.dpen')
    if exists(ensemble_path):
        map_model, _ = _load_model(run_dir, config)
        layout = FlatParameters(map_model)
        ensemble = PosteriorEnsemble.load(ensemble_path, layout)
        if evaluation.n_posterior_samples:
            ensemble = PosteriorEnsemble(
                ensemble.samples[-evaluation.n_posterior_samples:],
                ensemble.log_posteriors[-evaluation.n_posterior_samples:],
                ensemble.iterations[-evaluation.n_posterior_samples:],
                layout)
        layout.assign(map_estimate(ensemble)[1][:-2])
        variants['map'] = map_model
        posterior_model, _ = _load_model(run_dir, config)

    series, histograms = evaluate_cases(truth, variants, evaluation.cadence,
                                        reference, evaluation, ensemble,
                                        posterior_model, verbose)
    series.to_csv(join(run_dir, 'metrics.csv'))
    histograms[0].to_csv(join(run_dir, 'histogram.csv'))
    plot_metrics(series, join(run_dir, 'metrics'))
    plot_histogram(histograms[0], join(run_dir, 'histogram.svg'))
    write_manifest(run_dir, config, {'metrics': 'metrics.csv',
                                     'histogram': 'histogram.csv'})
    for case, blowups in series.blowups.items():
        for name, time in blowups.items():
            if time is not None:
                log('case {}: {} blew up after {:.0f} hours'.format(case, name,
                                                                   time))


def cmd_plot(config, run_dir, verbose):
    written = []
    if exists(join(run_dir, 'history.csv')):
        history = TrainHistory.from_csv(join(run_dir, 'history.csv'))
        written.append(plot_history(history, join(run_dir, 'history.svg')))
    if exists(join(run_dir, 'metrics.csv')):
        series = MetricSeries.from_csv(join(run_dir, 'metrics.csv'))
        written += plot_metrics(series, join(run_dir, 'metrics'))
    if exists(join(run_dir, 'histogram.csv')):
        histogram = VorticityHistogram.from_csv(join(run_dir,
                                                     'histogram.csv'))
        written.append(plot_histogram(histogram,
                                      join(run_dir, 'histogram.svg')))
    if not written:
        raise UsageError('Nothing to plot in {}.'.format(run_dir))
    for path in written:
        log('wrote {}'.format(path))


def gradient_checks(seed=0, n_obs=2, k=4, nx=8):
    """Maximum relative errors between tape gradients and central finite
    differences for a solver rollout, the CNN closure and the trajectory
    loss, on a small grid.

    Returns
    -------
    errors: dict

    """
    generator = Generator().manual_seed(seed)
    amplitude = 1e-5
    params = PhysicalParams(nx=nx)
    x0 = randn((2, nx, nx), generator=generator, dtype=float64)

    def solver(x):
        q = rollout(ops.scale(x, amplitude), n_obs, k, params)[-1]
        return ops.reduce_mean(ops.square(ops.scale(q, 1 / amplitude)))

    closure = CNNClosure(channels=(2, 8, 8, 2), seed=seed)

    def network(x):
        return ops.reduce_mean(ops.square(closure(x)))

    with no_grad():
        truth = stack(rollout(amplitude * x0.unsqueeze(0), n_obs, k, params),
                      dim=1)
    model = QGModel(PhysicalParams(nx=nx, delta=0.2, U1=0.02),
                    CNNClosure(channels=(2, 4, 2), seed=seed))
    model.closure.set_normalization_constants(
        zeros(2, dtype=float64), full((2,), amplitude, dtype=float64),
        zeros(2, dtype=float64), full((2,), amplitude * 1e-7, dtype=float64))
    criterion = TrajectoryMSELoss(amplitude)

    def loss():
        forecast = rollout(truth[:, 0], n_obs, k, model.params, model.closure)
        return criterion(forecast, truth)

    weight = model.closure.layers[0].weight
    return {
        'solver': grad_check(solver, x0, floor=1e-8),
        'closure': grad_check(network, x0, indices=range(0, x0.numel(), 5),
                              floor=1e-8),
        'loss': grad_check_parameters(
            loss, [model.params.delta, model.params.U1, weight],
            indices=[[0], [0], list(range(0, weight.numel(), 7))],
            floor=1e-8)}


def cmd_gradcheck(config, run_dir, verbose):
    errors = gradient_checks(seed=config.train.seed)
    for name, error in errors.items():
        print('{}: max relative error {:.3e}'.format(name, error))
    return 0 if all(e < GRADCHECK_TOLERANCE for e in errors.values()) else 1


HANDLERS = {'generate': cmd_generate, 'train': cmd_train,
            'sample': cmd_sample, 'evaluate': cmd_evaluate, 'plot': cmd_plot,
            'gradcheck': cmd_gradcheck}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog='torchqgml',
                     description='Hybrid two-layer quasi-geostrophic model '
                                 'with learned closures.')
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--config', help='key = value configuration file')
    parser.add_argument('--set', dest='overrides', action='append',
                        default=[], metavar='KEY=VALUE',
                        help='override one configuration key (repeatable)')
    parser.add_argument('--run', default='default',
                        help='run directory (default: %(default)s)')
    parser.add_argument('--quiet', action='store_true',
                        help='disable progress bars')
    return parser


def main(argv=None):
    """Entry point. Returns the exit code: 0 on success, 2 on usage errors
    (bad flags, configuration or missing inputs) and 1 on other failures.

    """
    try:
        args = build_parser().parse_args(argv)
        if args.config is not None and not exists(args.config):
            raise UsageError('Configuration file {} not found.'.format(
                args.config))
        config = load_config(args.config, args.overrides)
        run_dir = get_run_dir(args.run)
        log('{} | run directory: {}'.format(args.command, run_dir))
        code = HANDLERS[args.command](config, run_dir, not args.quiet)
    except (UsageError, ConfigError) as e:
        log('usage error: {}'.format(e))
        return EXIT_USAGE
    except (FileFormatError, IntegrationBlowupError, TrainingDivergedError,
            SamplerDivergedError, WrongArgumentsError, OSError) as e:
        log('error: {}: {}'.format(type(e).__name__, e))
        return 1
    return 0 if code is None else code


if __name__ == '__main__':
    sys.exit(main())
