"""Hot sparse kernels, compiled when available.

The compiled core (``bankgcn._ckernels``, built from Cython) is preferred.
Setting ``BANKGCN_PURE_PYTHON=1`` before import forces the numpy/scipy
fallback; ``BACKEND`` reports which one is active.
"""

import os

from bankgcn import _fallback

_impl = _fallback
BACKEND = "python"

if not os.environ.get("BANKGCN_PURE_PYTHON"):
    try:
        from bankgcn import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

make_operator = _impl.make_operator
matmat = _impl.matmat
cheb_stack = _impl.cheb_stack
cheb_apply = _impl.cheb_apply
segment_max = _impl.segment_max


def backends():
    """Map of backend name -> module for every importable kernel set."""
    found = {"python": _fallback}
    try:
        from bankgcn import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
