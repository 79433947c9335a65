"""Python bindings for the modal_attrib C++ core."""

import json as _json

from ._modal_attrib import (
    Error,
    Model,
    agreement as _agreement,
    brute_force_shap,
    classify_pattern,
    commands,
    default_tolerance,
    mock_annotate as _mock_annotate,
    rerun_json as _rerun_json,
    run_json as _run_json,
    shap_interactions,
    shap_values,
    train,
)

__all__ = [
    "Error",
    "Model",
    "agreement",
    "brute_force_shap",
    "classify_pattern",
    "commands",
    "default_tolerance",
    "mock_annotate",
    "rerun",
    "run",
    "shap_interactions",
    "shap_values",
    "train",
]


def run(command, config=None, **options):
    """Run a pipeline command; returns the manifest as a dict."""
    cfg = dict(config or {})
    cfg.update(options)
    return _json.loads(_run_json(command, _json.dumps(cfg, default=str)))


def rerun(manifest, out=None, check=False):
    return _json.loads(_rerun_json(str(manifest), None if out is None else str(out), check))


def agreement(machine_jsonl, human_csv, threshold=50.0):
    return _json.loads(_agreement(machine_jsonl, human_csv, threshold))


def mock_annotate(text, seed=0):
    return _json.loads(_mock_annotate(text, seed))
