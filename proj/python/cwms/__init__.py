"""Containerized workflow planner, launcher and simulator."""

import json
from pathlib import Path

from ._cwms import (
    CwmsError,
    job_counts,
    normalize_catalog,
    parse_image_url,
    plan,
    render_wrappers,
    sweep,
    topological_levels,
)
from . import _cwms

__all__ = [
    "CwmsError",
    "error_code",
    "job_counts",
    "normalize_catalog",
    "parse_image_url",
    "plan",
    "plan_files",
    "render_wrappers",
    "run_mock",
    "simulate",
    "sweep",
    "topological_levels",
]


def error_code(err: CwmsError) -> str:
    """The machine-checkable code of a CwmsError, e.g. ``"CycleDetected"``."""
    return str(err).split(":", 1)[0]


def plan_files(workflow, catalog, sites, **options) -> str:
    """Like :func:`plan`, reading the three YAML inputs from paths."""
    return plan(Path(workflow).read_text(), Path(catalog).read_text(), Path(sites).read_text(), **options)


def run_mock(executable: str, **options) -> dict:
    """Mock execution; returns the execution report as a dict."""
    return json.loads(_cwms.run_mock(executable, **options))


def simulate(executable: str, topology, **options) -> dict:
    """Simulate on a topology given as YAML text or a path to a YAML file."""
    text = Path(topology).read_text() if isinstance(topology, Path) else topology
    return _cwms.simulate(executable, text, **options)
