"""Finite-element toolkit for a four-species volume-surface reaction-diffusion
system on the unit disk: transient solver, direct stationary solver, fast
release-rate limit studies, and diagnostics."""

__version__ = "0.1.0"

from .errors import VsrdError  # noqa: F401
