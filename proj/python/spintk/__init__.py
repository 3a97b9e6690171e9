"""Python bindings for the spintk spin-defect toolkit."""

from ._spintk import *  # noqa: F401,F403
from ._spintk import __doc__  # noqa: F401

__version__ = "0.1.0"
