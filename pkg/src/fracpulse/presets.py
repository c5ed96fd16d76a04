"""Bundled run configurations that regenerate the figure data sets.

Every preset uses the cutoffs ``f_min = 10 kHz``, ``f_max = 10 GHz``, the
noise energy ``R0 = 1 mV^2`` and the device ``V0 = 40 mV``,
``J0 = 0.01 ueV``, ``kappa = 80 /V`` unless it says otherwise.
"""

from __future__ import annotations

import math

from .config import ConfigError, RunConfig

FOUR_SHAPES = ("square", "gaussian", "exp-of-gaussian", "beta")

PRESETS = {
    # normalized correlation and spectrum for a 1e6 cutoff ratio
    "fig1": {
        "alphas": (0.5, 1.0, 1.5),
        "sweep": {"axis": "dt", "start": 1e-12, "stop": 1e-3, "n": 91, "scale": "log"},
        "normalized": True,
    },
    # the four waveforms at T = 10 ns; the optimal one for alpha = 1.4
    "fig2a": {"alphas": (1.4,), "durations": (10e-9,), "shapes": FOUR_SHAPES},
    # infidelity against pulse length; the slope check uses only the interior decades
    "fig2b": {
        "alphas": (0.5, 1.4),
        "shapes": FOUR_SHAPES,
        "sweep": {"axis": "T", "start": 1e-9, "stop": 1e-5, "n": 17, "scale": "log"},
    },
    # infidelity against the spectral exponent at two pulse lengths
    "fig2c": {
        "alphas": (0.5,),
        "durations": (10e-9, 1e-6),
        "shapes": FOUR_SHAPES,
        "sweep": {"axis": "alpha", "start": 0.1, "stop": 1.9, "n": 19, "scale": "linear"},
    },
    # exact, coarse and improved correlation at alpha = 1.4 and theta = 0.5
    "fig3": {
        "alphas": (1.4,),
        "durations": (0.5 / (2 * math.pi * 1e4),),
        "variants": ("exact", "coarse", "improved"),
        "sweep": {"axis": "dtau", "start": 0.0, "stop": 1.0, "n": 101, "scale": "linear"},
        "normalized": False,
    },
    # Monte Carlo against the quadratic form with the noise energy scaled down 1e4 times
    "validate-perturbative": {
        "r0": 1e-10,
        "alphas": (0.5, 1.0, 1.4),
        "durations": (10e-9,),
        "shapes": ("square", "gaussian", "beta"),
        "n_traj": 20000,
        "seed": 2024,
    },
}


def preset(name: str) -> dict:
    """Field values of a bundled preset (the ``preset`` field names it)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return dict(PRESETS[name]) | {"preset": name}


def preset_config(name: str) -> RunConfig:
    return RunConfig.from_dict(preset(name))
