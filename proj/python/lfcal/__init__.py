"""Light-field camera-array calibration."""

from ._lfcal import *  # noqa: F401,F403
from ._lfcal import __version__  # noqa: F401
