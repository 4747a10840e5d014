"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

``BACKEND`` records which implementation was selected at import time:
``"cython"`` when the compiled extension is available, else ``"python"``.
Both expose the same functions and compute the same math in the same order.
"""

from kwmatch._kernels import _pyref

try:
    from kwmatch._kernels import _core

    BACKEND = "cython"
    _impl = _core
except ImportError:  # extension not built; fall back to numpy
    BACKEND = "python"
    _impl = _pyref

fastpair_forward_batch = _impl.fastpair_forward_batch
fastpair_train_epoch = _impl.fastpair_train_epoch
