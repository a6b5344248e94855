import json

from ._wnls import (
    ConfigError,
    NumericalAbort,
    c_rl,
    evolve,
    experiments,
    gauged_nonlinearity,
    half_width,
    hamiltonian,
    mass,
    replay,
    sample_gff,
    sigma,
    wick_power,
)
from . import _wnls


def defaults(kind):
    return json.loads(_wnls.defaults(kind))


def run_experiment(kind, params=None, seed=1, out_dir="runs", workers=0):
    """Run a registered experiment and return its manifest as a dict."""
    text = _wnls.run_experiment(kind, json.dumps(params or {}), seed, str(out_dir), workers)
    return json.loads(text)


__all__ = [
    "ConfigError",
    "NumericalAbort",
    "c_rl",
    "defaults",
    "evolve",
    "experiments",
    "gauged_nonlinearity",
    "half_width",
    "hamiltonian",
    "mass",
    "replay",
    "run_experiment",
    "sample_gff",
    "sigma",
    "wick_power",
]
