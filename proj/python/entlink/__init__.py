"""Entanglement-based link simulator: Bell tests, fringe scans and QKD sessions."""

import json as _json
import os as _os

from . import _core
from ._core import (
    __version__,
    accidental_rate,
    binary_entropy,
    cascade,
    chsh_value,
    correlation,
    final_key_length,
    joint_probability,
    qber_from_visibility,
    toeplitz_hash,
)

__all__ = [
    "__version__",
    "accidental_rate",
    "binary_entropy",
    "bell_test",
    "cascade",
    "chsh",
    "chsh_value",
    "coincidences",
    "correlation",
    "default_link_config",
    "final_key_length",
    "fit_fringe",
    "joint_probability",
    "qber_from_visibility",
    "qkd_session",
    "run_scenario",
    "simulate",
    "toeplitz_hash",
    "verify",
    "visibility_scan",
]


def default_link_config():
    """Default link block as a dict (same keys as a scenario's "link")."""
    return _json.loads(_core.default_link_config())


def simulate(config):
    """Event streams of one run.

    Returns {"alice": [...], "bob": [...], "truth": [...]}; events are
    [time_ps, detector, pulse_index, offset_ps], truth rows are
    [alice_index, bob_index, depolarized].
    """
    return _json.loads(_core._simulate(_json.dumps(config)))


def coincidences(config, convention="full_width"):
    """Matched records [alice_index, bob_index, alice_detector, bob_detector, delta_ps]."""
    return _json.loads(_core._coincidences(_json.dumps(config), convention))


def chsh(e_values, sigmas):
    """S, sigma and significance from four correlations in (a,b), (a,b'), (a',b), (a',b') order."""
    return _json.loads(_core._chsh(list(e_values), list(sigmas)))


def bell_test(config, normalize=True, convention="full_width"):
    return _json.loads(_core._bell_test(_json.dumps(config), normalize, convention))


def fit_fringe(angles_deg, counts, weighted=False):
    """Fit N = C (1 - V cos 2(theta - theta0)); returns the fit or {"error": ...}."""
    return _json.loads(_core._fit_fringe(list(angles_deg), list(counts), weighted))


def visibility_scan(config, bob_angles_deg, alice_angles_deg, weighted=False):
    return _json.loads(
        _core._visibility_scan(_json.dumps(config), list(bob_angles_deg), list(alice_angles_deg), weighted)
    )


def qkd_session(config, seed=0, placement="lockstep"):
    """Simulate the link and run the key-distribution protocol; returns the ledger plus hex keys."""
    return _json.loads(_core._session(_json.dumps(config), seed, placement))


def run_scenario(path, report_dir=None, seed=None):
    return _json.loads(
        _core._run_scenario(_os.fspath(path), None if report_dir is None else _os.fspath(report_dir), seed)
    )


def verify(report_dir):
    return _json.loads(_core._verify(_os.fspath(report_dir)))
