from .metrics import mse, r2, coverage, coverage_series
from .forecast import ForecastEvaluator, MetricSeries, VorticityHistogram, \
    evaluate_run, evaluate_cases, baseline_variants, vorticity_histogram
from .forecast import plot_metrics, plot_history, plot_histogram
