"""Normalized gradient descent toward flat minima, with numerical verifiers."""

import json

from ._core import (
    FlatminError,
    Problem,
    Trajectory,
    catalog_names,
    gradient_flow,
    parse_config,
    print_config,
    run_experiment,
    run_gd,
    run_ngd,
)
from . import _core

__all__ = [
    "FlatminError",
    "Problem",
    "Trajectory",
    "catalog_names",
    "fermat_check",
    "gradient_flow",
    "parse_config",
    "print_config",
    "reproduce_table1",
    "run_experiment",
    "run_gd",
    "run_ngd",
    "sharpness_profile",
    "verify",
]


def verify(problem, checks=("all",), **kwargs):
    """Run verifiers; returns a list of {check, skipped, pass, report} dicts."""
    return json.loads(_core.verify_json(problem, list(checks), **kwargs))


def fermat_check(problem, x, params=None):
    return json.loads(_core.fermat_check_json(problem, list(x), params or {}))


def sharpness_profile(problem, t, branch=0, radii=(), params=None):
    return json.loads(_core.sharpness_profile_json(problem, list(t), branch, list(radii), params or {}))


def reproduce_table1(seed=1, trials=50, only=(), iters=300000, radius=2e-2):
    return json.loads(_core.reproduce_table1_json(seed, trials, list(only), iters, radius))
