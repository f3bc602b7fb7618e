"""Certified Poincare constants and Neumann eigenvalue bounds."""

import json as _json

from ._qcbound import *  # noqa: F401,F403
from ._qcbound import __version__, run as _run


def run_report(command, config, **kwargs):
    """Runs one command and returns (exit_code, parsed JSON report or None, error)."""
    code, text, error = _run(command, config, format="json", **kwargs)
    return code, (_json.loads(text) if text else None), error
