"""Laser-dressed Floquet resonances, exceptional points and adiabatic loops."""

from ._floquet import *  # noqa: F401,F403
from ._floquet import __doc__  # noqa: F401
