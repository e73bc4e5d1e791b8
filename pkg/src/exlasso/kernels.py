"""Backend selection for the hot loops.

The compiled extension is used when it was built and ``EXLASSO_PURE_PYTHON``
is unset; otherwise the numpy fallback is used. ``BACKEND`` names the choice.
"""
import os

from . import _fallback

fallback = _fallback

compiled = None
if not os.environ.get("EXLASSO_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else _fallback
BACKEND = "cython" if compiled is not None else "python"

group_prox = _impl.group_prox
logistic_prox = _impl.logistic_prox
