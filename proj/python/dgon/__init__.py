"""DeepGraphONet: learn dynamical systems on graphs from trajectory data."""

from ._dgon import *  # noqa: F401,F403
from ._dgon import __doc__  # noqa: F401

__version__ = "0.1.0"
