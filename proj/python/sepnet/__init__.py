"""Separable (Kronecker-factored) transforms, regularizers, attacks and training.

Arrays are converted in Fortran order: numpy index [i0, i1, ...] is tensor
entry (i0, i1, ...), with mode 0 varying fastest in vec().
"""

from ._sepnet import *  # noqa: F401,F403
from ._sepnet import __doc__  # noqa: F401
