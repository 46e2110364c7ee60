"""Diffusion-based semantic communication simulator."""

from semcom._core import *  # noqa: F401,F403
from semcom._core import __doc__  # noqa: F401
