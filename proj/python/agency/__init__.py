"""Python bindings for the N-plus-1 agency core."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
