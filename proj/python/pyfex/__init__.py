"""Python bindings for the fex finite-expression search engine."""

import json as _json

from ._core import (  # noqa: F401
    ConfigError,
    DataError,
    EvaluationFailure,
    euler_residual_loss,
    evaluate,
    fit_sequence,
    generate_trajectories,
    param_count,
    param_gradient,
    quantile_threshold,
    rollout,
    score_from_loss,
    symbolic,
    vector_field,
)
from ._core import run_pipeline as _run_pipeline

__version__ = "0.1.0"


def run_pipeline(config, base_dir="", write_files=False):
    """Run the search pipeline from a config dict and return the results dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_run_pipeline(text, str(base_dir), write_files))
