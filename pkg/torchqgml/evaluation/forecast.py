# -*- coding: utf-8 -*-
"""
Copyright TorchQGML developers
"""

import warnings

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from matplotlib.figure import Figure
from pandas import DataFrame, concat, read_csv
from torch import no_grad, stack
from tqdm.autonotebook import tqdm

from ..bayes import posterior_moments
from ..dynamics import ModelState, iterate, total_kinetic_energy
from ..exceptions import IntegrationBlowupError, NotYetEvaluatedError, \
    SizeMismatchError, WrongArgumentsError
from ..models import NullClosure, QGModel, SmagorinskyClosure
from ..utils.config import EvaluationConfig
from .metrics import coverage_series, mse, r2

METRIC_COLUMNS = ['time', 'variant', 'r2', 'mse', 'ke', 'band_lo', 'band_hi',
                  'coverage']
HISTOGRAM_COLUMNS = ['bin_lo', 'bin_hi', 'variant', 'density']
POSTERIOR = 'posterior_mean'
TRUTH = 'truth'
HOURS_PER_YEAR = 8640


def baseline_variants(params, smagorinsky_constant=0.1):
    """Coarse models without parameterization and with the Smagorinsky
    closure, both run with the physical parameters `params`.

    """
    return {'no_closure': QGModel(params.with_grid(params.nx, params.ny,
                                                   trainable=()),
                                  NullClosure()),
            'smagorinsky': QGModel(params.with_grid(params.nx, params.ny,
                                                    trainable=()),
                                   SmagorinskyClosure(smagorinsky_constant))}


@dataclass
class MetricSeries:
    """Per-time skill of every variant, in long format.

    Attributes
    ----------
    frame: pandas.DataFrame
        Columns time (hours), variant, r2, mse, ke, band_lo, band_hi,
        coverage. The band and coverage columns are only filled for the
        posterior variant.
    blowups: dict
        Time (hours) at which each variant blew up, None if it did not.

    """
    frame: DataFrame
    blowups: dict = field(default_factory=dict)

    def variant(self, name):
        return self.frame[self.frame['variant'] == name].reset_index(
            drop=True)

    @property
    def variants(self):
        return list(dict.fromkeys(self.frame['variant']))

    def to_csv(self, path):
        self.frame.to_csv(path, index=False, float_format='%.17g')

    @classmethod
    def from_csv(cls, path):
        return cls(read_csv(path))


@dataclass
class VorticityHistogram:
    """Empirical densities of the upper-layer PV over the final evaluation
    window, on bins shared by all variants.

    """
    edges: object
    densities: dict

    def to_dataframe(self):
        rows = []
        for name, density in self.densities.items():
            for lo, hi, d in zip(self.edges[:-1], self.edges[1:], density):
                rows.append((lo, hi, name, d))
        return DataFrame(rows, columns=HISTOGRAM_COLUMNS)

    def to_csv(self, path):
        self.to_dataframe().to_csv(path, index=False, float_format='%.17g')

    @classmethod
    def from_csv(cls, path):
        frame = read_csv(path)
        first = frame[frame['variant'] == frame['variant'].iloc[0]]
        edges = np.append(first['bin_lo'].to_numpy(),
                          first['bin_hi'].to_numpy()[-1])
        densities = {name: rows['density'].to_numpy()
                     for name, rows in frame.groupby('variant', sort=False)}
        return cls(edges, densities)


def histogram_window(config, n_times, cadence, dt):
    """Number of final evaluation times covered by the histogram window.
    With ``scale_histogram_window`` the window shrinks with the horizon
    relative to a one-year run.

    """
    days = config.histogram_days
    if config.scale_histogram_window:
        days *= min(1., config.horizon_steps * dt / 3600. / HOURS_PER_YEAR)
    return int(min(n_times, max(1, round(days * 86400. / (cadence * dt)))))


def vorticity_histogram(fields, n_bins=64):
    """Densities of the upper-layer PV of every entry of `fields` on
    `n_bins` uniform bins spanning their pooled range.

    Parameters
    ----------
    fields: dict
        Variant name to tensor of shape (n_times, 2, ny, nx).
    n_bins: int

    Returns
    -------
    histogram: VorticityHistogram

    """
    upper = {name: f[:, 0].detach().numpy().ravel()
             for name, f in fields.items() if len(f) > 0}
    if not upper:
        raise WrongArgumentsError('No field to build a histogram from.')
    pooled = np.concatenate(list(upper.values()))
    lo, hi = pooled.min(), pooled.max()
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, n_bins + 1)
    densities = {name: np.histogram(values, bins=edges, density=True)[0]
                 for name, values in upper.items()}
    return VorticityHistogram(edges, densities)


def _rollout(model, q0, n_obs, cadence):
    """States every `cadence` steps until `n_obs` or a blowup."""
    states = [q0]
    blowup = None
    with no_grad():
        try:
            for state in iterate(ModelState(q0), n_obs, cadence, model.params,
                                 model.closure):
                states.append(state.q)
        except IntegrationBlowupError as e:
            blowup = e
    return stack(states), blowup


class ForecastEvaluator:
    """Online forecast comparison of coarse model variants against a truth
    trajectory, all started from the truth initial state.

    Parameters
    ----------
    truth: torch.Tensor, shape: (n_times, 2, ny, nx)
        Coarse truth sampled every `cadence` solver steps.
    variants: dict
        Name to :class:`torchqgml.models.QGModel`.
    cadence: int
        Solver steps between two evaluation times.
    reference_params: torchqgml.dynamics.PhysicalParams
        Parameters used to compute the kinetic energy of every variant, so
        that energies are comparable.
    config: torchqgml.utils.config.EvaluationConfig, optional
    ensemble: torchqgml.bayes.PosteriorEnsemble, optional
    posterior_model: torchqgml.models.QGModel, optional
        Model whose parameters are replaced by the ensemble samples. Both
        `ensemble` and `posterior_model` are needed for the posterior
        variant.
    n_workers: int
        Variants rolled out concurrently.

    Attributes
    ----------
    evaluated: bool
        Indicate whether the `evaluate` method has been called.
    series: MetricSeries
    histogram: VorticityHistogram
    forecasts: dict
        Variant name to its trajectory (truncated at blowup).

    """
    def __init__(self, truth, variants, cadence, reference_params,
                 config=None, ensemble=None, posterior_model=None,
                 n_workers=1):
        if truth.dim() != 4 or truth.shape[1] != 2:
            raise SizeMismatchError('The truth must have shape (n_times, 2, '
                                    'ny, nx), got {}.'.format(
                                        tuple(truth.shape)))
        if posterior_model is not None and (ensemble is None or
                                            len(ensemble) == 0):
            raise WrongArgumentsError('The posterior variant needs a nonempty '
                                      'ensemble.')
        self.truth = truth
        self.variants = dict(variants)
        self.cadence = int(cadence)
        self.reference_params = reference_params
        self.config = EvaluationConfig() if config is None else config
        self.ensemble = ensemble
        self.posterior_model = posterior_model
        self.n_workers = n_workers

        self.evaluated = False
        self.series = None
        self.histogram = None
        self.forecasts = {}

    @property
    def n_obs(self):
        return min(self.config.horizon_steps // self.cadence,
                   len(self.truth) - 1)

    def hours(self, n):
        return [i * self.cadence * self.reference_params.dt / 3600.
                for i in range(n)]

    def _energy(self, fields):
        with no_grad():
            return total_kinetic_energy(fields, self.reference_params)

    def _rows(self, name, fields, band=None, cover=None):
        n = len(fields)
        truth = self.truth[:n]
        frame = DataFrame({'time': self.hours(n), 'variant': name,
                           'r2': r2(truth, fields).tolist(),
                           'mse': mse(truth, fields).tolist(),
                           'ke': self._energy(fields).tolist()},
                          columns=METRIC_COLUMNS)
        if band is not None:
            frame['band_lo'] = band[0][:n].tolist()
            frame['band_hi'] = band[1][:n].tolist()
        if cover is not None:
            frame['coverage'] = cover[:n].tolist()
        return frame

    def evaluate(self, verbose=True):
        """Roll out every variant and compute the metric series and the
        final-window histogram.

        """
        n_obs = self.n_obs
        if n_obs < 1:
            raise WrongArgumentsError('The truth holds no evaluation time '
                                      'after the initial one.')
        q0 = self.truth[0]
        names = list(self.variants)
        with ThreadPoolExecutor(max_workers=self.n_workers) as pool:
            results = list(tqdm(pool.map(
                lambda n: _rollout(self.variants[n], q0, n_obs, self.cadence),
                names), total=len(names), unit='variant',
                disable=not verbose))

        frames = [self._rows(TRUTH, self.truth[:n_obs + 1])]
        blowups = {TRUTH: None}
        self.forecasts = {TRUTH: self.truth[:n_obs + 1]}
        for name, (fields, error) in zip(names, results):
            self.forecasts[name] = fields
            blowups[name] = None
            if error is not None:
                blowups[name] = self.hours(len(fields) + 1)[-1]
                warnings.warn('Variant {} blew up after {:.0f} hours: '
                              '{}'.format(name, blowups[name], error))
            frames.append(self._rows(name, fields))

        if self.posterior_model is not None:
            moments = posterior_moments(self.posterior_model, self.ensemble,
                                        q0, n_obs, self.cadence,
                                        verbose=verbose)
            ke_sigma = moments.ke_variance.sqrt()
            band = (moments.ke_mean - 2 * ke_sigma,
                    moments.ke_mean + 2 * ke_sigma)
            cover = coverage_series(self.truth[:n_obs + 1], moments.mean,
                                    moments.sigma)
            frame = self._rows(POSTERIOR, moments.mean, band, cover)
            frame['ke'] = moments.ke_mean.tolist()
            frames.append(frame)
            self.forecasts[POSTERIOR] = moments.mean
            blowups[POSTERIOR] = None
            if moments.n_invalid:
                warnings.warn('{} posterior samples blew up and were '
                              'excluded.'.format(moments.n_invalid))

        self.series = MetricSeries(concat(frames, ignore_index=True),
                                   blowups)
        n_window = histogram_window(self.config, n_obs + 1, self.cadence,
                                    self.reference_params.dt)
        start = n_obs + 1 - n_window
        self.histogram = vorticity_histogram(
            {name: f[start:] for name, f in self.forecasts.items()},
            self.config.n_bins)
        self.evaluated = True
        return self.series, self.histogram

    def metrics(self):
        if not self.evaluated:
            raise NotYetEvaluatedError('Evaluator not evaluated, call '
                                       '`ForecastEvaluator.evaluate()`.')
        return self.series

    def vorticity_histogram(self):
        if not self.evaluated:
            raise NotYetEvaluatedError('Evaluator not evaluated, call '
                                       '`ForecastEvaluator.evaluate()`.')
        return self.histogram


def evaluate_run(truth, variants, cadence, reference_params, config=None,
                 ensemble=None, posterior_model=None, verbose=True):
    """Evaluate `variants` (and the posterior variant when `ensemble` and
    `posterior_model` are given) on one truth trajectory.

    Returns
    -------
    series: MetricSeries
    histogram: VorticityHistogram

    """
    evaluator = ForecastEvaluator(truth, variants, cadence, reference_params,
                                  config, ensemble, posterior_model)
    return evaluator.evaluate(verbose=verbose)


def evaluate_cases(trajectories, variants, cadence, reference_params,
                   config=None, ensemble=None, posterior_model=None,
                   verbose=True):
    """:func:`evaluate_run` on several held-out cases.

    Parameters
    ----------
    trajectories: torch.Tensor, shape: (n_cases, n_times, 2, ny, nx)

    Returns
    -------
    series: MetricSeries
        With an extra `case` column.
    histograms: list of VorticityHistogram

    """
    config = EvaluationConfig() if config is None else config
    n_cases = min(config.n_cases, len(trajectories))
    frames, histograms, blowups = [], [], {}
    for case in range(n_cases):
        series, histogram = evaluate_run(trajectories[case], variants,
                                         cadence, reference_params, config,
                                         ensemble, posterior_model, verbose)
        frame = series.frame.copy()
        frame.insert(0, 'case', case)
        frames.append(frame)
        histograms.append(histogram)
        blowups[case] = series.blowups
    return MetricSeries(concat(frames, ignore_index=True), blowups), \
        histograms


def _save(figure, path):
    figure.savefig(path, format='svg', bbox_inches='tight')


def plot_metrics(series, prefix):
    """One SVG line plot per metric (R2, MSE, total KE versus hours), written
    to `prefix` + '_r2.svg' and so on. The posterior variant gets its 2-sigma
    KE band. Returns the written paths.

    """
    frame = series.frame
    if 'case' in frame:
        frame = frame[frame['case'] == frame['case'].min()]
    paths = []
    for metric, label in (('r2', 'R$^2$'), ('mse', 'MSE'),
                          ('ke', 'Total KE (m$^2$ s$^{-2}$)')):
        figure = Figure(figsize=(6, 4))
        ax = figure.add_subplot()
        for name in dict.fromkeys(frame['variant']):
            rows = frame[frame['variant'] == name]
            ax.plot(rows['time'], rows[metric], label=name)
            if metric == 'ke' and rows['band_lo'].notna().any():
                ax.fill_between(rows['time'], rows['band_lo'],
                                rows['band_hi'], alpha=0.3)
        ax.set_xlabel('Time (hours)')
        ax.set_ylabel(label)
        ax.legend()
        path = '{}_{}.svg'.format(prefix, metric)
        _save(figure, path)
        paths.append(path)
    return paths


def plot_history(history, path):
    """Training and validation losses, delta and U1 versus epoch."""
    frame = history.to_dataframe()
    figure = Figure(figsize=(10, 3))
    axes = figure.subplots(1, 3)
    axes[0].plot(frame['epoch'], frame['train_loss'], label='train')
    axes[0].plot(frame['epoch'], frame['val_loss'], label='validation')
    axes[0].set_yscale('log')
    axes[0].legend()
    axes[1].plot(frame['epoch'], frame['delta'])
    axes[1].set_title('delta')
    axes[2].plot(frame['epoch'], frame['U1'])
    axes[2].set_title('U1')
    for ax in axes:
        ax.set_xlabel('Epoch')
    _save(figure, path)
    return path


def plot_histogram(histogram, path):
    """Upper-layer PV densities of every variant."""
    figure = Figure(figsize=(6, 4))
    ax = figure.add_subplot()
    centers = 0.5 * (histogram.edges[:-1] + histogram.edges[1:])
    for name, density in histogram.densities.items():
        ax.plot(centers, density, label=name)
    ax.set_yscale('log')
    ax.set_xlabel('Upper layer PV (1/s)')
    ax.set_ylabel('Density')
    ax.legend()
    _save(figure, path)
    return path
