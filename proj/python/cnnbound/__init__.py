"""Norm-based generalization bounds for convolutional networks."""

from ._cnnbound import *  # noqa: F401,F403
from ._cnnbound import __version__  # noqa: F401
