"""Car-following distance extraction and analysis."""

from ._core import *  # noqa: F401,F403
from ._core import CarfollowError, BoostedModel  # noqa: F401
