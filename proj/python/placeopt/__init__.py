"""Surrogate-guided mixer placement optimization."""

from ._placeopt import *  # noqa: F401,F403
from ._placeopt import __doc__  # noqa: F401

__version__ = "0.1.0"
