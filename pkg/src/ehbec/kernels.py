"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``EHBEC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py as fallback

compiled = None
if os.environ.get("EHBEC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "python"

epoch_counts = _impl.epoch_counts
belief_dp_stage = _impl.belief_dp_stage
fb_tree_rate = _impl.fb_tree_rate
