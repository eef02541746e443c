"""Cavity-measurement spin squeezing simulator.

Thin wrappers over the C++ core; JSON reports come back as dicts.
"""

import json
from pathlib import Path

from . import _core
from ._core import ConfigError, FitError, conditional_variance, from_db, scenario_names, to_db

__version__ = _core.__version__

__all__ = [
    "ConfigError",
    "FitError",
    "conditional_variance",
    "from_db",
    "integrate_sigma2",
    "limits",
    "model",
    "resolved_config",
    "run_scenario",
    "scenario_names",
    "simulate",
    "squeezing_parameters",
    "to_db",
]


def resolved_config(path):
    return json.loads(_core.resolved_config(str(path)))


def model(path):
    """Coupling, scattering and noise-budget numbers derived from a config file."""
    return json.loads(_core.model_json(str(path)))


def run_scenario(name, config, trials=None, seed=None, threads=1, out=None):
    """Run a named scenario. Returns ({file name: text}, manifest); writes the files if `out` is given."""
    files, manifest = _core.run_scenario(name, str(config), trials, seed, threads)
    manifest = json.loads(manifest)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for fname, text in files.items():
            (out / fname).write_text(text)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return files, manifest


def simulate(config, photons, n0=None, plan="squeeze-readout", angle=0.0, phase_noise=0.0, trials=1000, seed=1,
             threads=1):
    """Per-trial readouts as numpy arrays plus the variance report."""
    out = _core.simulate(str(config), photons, n0, plan, angle, phase_noise, trials, seed, threads)
    out["variances"] = json.loads(out["variances"])
    return out


def squeezing_parameters(var_prep, var_meas, s0, contrast_meas, contrast_in=1.0, epsilon_p=0.0):
    return json.loads(_core.squeezing_parameters(var_prep, var_meas, s0, contrast_meas, contrast_in, epsilon_p))


def limits(collective_cooperativity, p_raman, p_scatter, phi_eff=0.0, rayleigh_f1=0.0, rayleigh_f2=0.0):
    return json.loads(_core.limits(collective_cooperativity, p_raman, p_scatter, phi_eff, rayleigh_f1, rayleigh_f2))


def integrate_sigma2(collective_cooperativity, p_raman, p_scatter, p_max, n_samples=200):
    return _core.integrate_sigma2(collective_cooperativity, p_raman, p_scatter, p_max, n_samples)
