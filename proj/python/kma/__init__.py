"""Koopman model averaging.

Learn an ensemble of linear embedding models of an unknown control system,
merge them with pseudo-BMA weights into a single weighted model, and use it
for multi-step prediction, LQR stabilization, and linear MPC tracking.
"""

from ._kma import *  # noqa: F401,F403
from ._kma import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
