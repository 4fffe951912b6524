"""Configuration, experiment execution, reports and plots."""

from .config import RunConfig, load_config, output_dir, parse_config
from .experiment import ExperimentResult, aggregate, report_certificate, run_experiment
from .plot import emit_plot, render_svg

__all__ = [
    "RunConfig",
    "parse_config",
    "load_config",
    "output_dir",
    "ExperimentResult",
    "run_experiment",
    "aggregate",
    "report_certificate",
    "emit_plot",
    "render_svg",
]
