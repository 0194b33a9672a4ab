"""Python bindings for the bpre toolkit."""

import json as _json

from ._bpre import (
    ConditioningStarvation,
    PopulationCapError,
    ValidationError,
    __version__,
    operation_names,
)
from . import _bpre

__all__ = [
    "ConditioningStarvation",
    "PopulationCapError",
    "ValidationError",
    "__version__",
    "model_hash",
    "model_json",
    "operation_names",
    "regime",
    "run",
]


def run(config):
    """Run an experiment config (dict or JSON text) and return the report as a dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_bpre.run_json(text))


def regime(model, k=1):
    """Regime, alpha and gamma of a model (builtin name or components dict)."""
    return run({"model": model, "operation": "regime", "seed": 0, "params": {"k": k}})["result"]


def model_json(model):
    return _json.loads(_bpre.model_json(_json.dumps(model)))


def model_hash(model):
    return _bpre.model_hash(_json.dumps(model))
