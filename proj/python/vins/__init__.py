"""Speed-constrained inertial navigation toolkit."""

from ._core import *  # noqa: F401,F403
from ._core import VinsError, __version__  # noqa: F401
