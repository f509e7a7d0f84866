"""Federated Q-learning simulator.

Thin wrapper over the compiled core; see ``fedq._core`` for the full API.
"""

import json as _json

from ._core import (
    CompressorBoundError,
    DimensionError,
    FedqError,
    TabularMdp,
    ValidationError,
    __version__,
    bellman_apply,
    build_experiment_mdp,
    build_hard_mdp,
    derive_params,
    hard_instance_p,
    load_mdp,
    mdp_from_json,
    quantize,
    run_fed_dvr,
    run_sync,
    solve_q_star,
)
from ._core import run_experiment as _run_experiment


def run_experiment(config):
    """Run a study. `config` is a dict or a JSON string.

    Returns (tables, summary): CSV text keyed by table name, and the parsed summary.
    """
    text = config if isinstance(config, str) else _json.dumps(config)
    out = _run_experiment(text)
    return dict(out["tables"]), _json.loads(out["summary"])


__all__ = [
    "CompressorBoundError",
    "DimensionError",
    "FedqError",
    "TabularMdp",
    "ValidationError",
    "__version__",
    "bellman_apply",
    "build_experiment_mdp",
    "build_hard_mdp",
    "derive_params",
    "hard_instance_p",
    "load_mdp",
    "mdp_from_json",
    "quantize",
    "run_experiment",
    "run_fed_dvr",
    "run_sync",
    "solve_q_star",
]
