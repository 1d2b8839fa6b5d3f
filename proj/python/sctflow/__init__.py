"""Python bindings for the sctflow trojan insertion and attack flow.

Designs travel as their serialized JSON text; reports come back as dicts.
"""

import json

from . import _core
from ._core import (  # noqa: F401
    AmbiguityError,
    InfeasibleError,
    ParseError,
    ValidationError,
    generate,
    presets,
    revert,
    ro_frequency_mhz,
    ro_power_uw,
    simulate,
)

__all__ = [
    "AmbiguityError",
    "InfeasibleError",
    "ParseError",
    "ValidationError",
    "analyze",
    "calibrate",
    "campaign",
    "decode",
    "design_sct",
    "generate",
    "insert",
    "monte_carlo",
    "presets",
    "revert",
    "ro_frequency_mhz",
    "ro_power_uw",
    "simulate",
]


def analyze(design, n_key, freq_mhz=0.0):
    return json.loads(_core.analyze(design, n_key, freq_mhz))


def design_sct(report, ro_class="", fraction=0.10, n_leak=2, competing_leakage_uw=0.0, allow_power_violation=False):
    return json.loads(
        _core.design_sct(json.dumps(report), ro_class, fraction, n_leak, competing_leakage_uw, allow_power_violation)
    )


def insert(design, sct):
    """Returns (trojaned design text, patch dict, signoff dict)."""
    trojaned, patch, signoff = _core.insert(design, json.dumps(sct))
    return trojaned, json.loads(patch), json.loads(signoff)


def decode(samples_ua, dt_s, n_key, n_leak=2, step_s=1e-3):
    return json.loads(_core.decode(list(samples_ua), dt_s, n_key, n_leak, step_s))


def campaign(trojaned, dies=25, repeats=3, seed=1, threads=1):
    return json.loads(_core.campaign(trojaned, dies, repeats, seed, threads))


def monte_carlo(design, samples=10000, seed=1, threads=1):
    return json.loads(_core.monte_carlo(design, samples, seed, threads))


def calibrate():
    return json.loads(_core.calibrate())
