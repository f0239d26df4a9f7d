"""Command-line experiment runner and metrics engine."""

from gustbench.cli.metrics import (
    MetricReport, deviation_components, estimate_noise, ground_effect_metrics, gust_metrics, improvement,
    metric_max_deviation, metric_t90, path_deviation, timing_stats, trace_metrics, trace_path,
    vertical_error, weight_drop_metrics,
)
from gustbench.cli.suites import SUITES, Check, SuiteResult, run_suite, worker_count

__all__ = [
    "MetricReport", "deviation_components", "estimate_noise", "ground_effect_metrics", "gust_metrics",
    "improvement", "metric_max_deviation", "metric_t90", "path_deviation", "timing_stats", "trace_metrics",
    "trace_path", "vertical_error", "weight_drop_metrics",
    "SUITES", "Check", "SuiteResult", "run_suite", "worker_count",
]
