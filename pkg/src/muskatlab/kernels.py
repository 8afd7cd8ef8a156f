"""Backend selection for the O(N^2) alpha-sums.

The compiled extension is used when it imports; otherwise the NumPy fallback.
Set ``MUSKATLAB_BACKEND=numpy`` to force the fallback.
"""
import os

from . import _fallback

fallback = _fallback

if os.environ.get("MUSKATLAB_BACKEND", "").lower() == "numpy":
    compiled = None
else:
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "numpy"


def max_threads() -> int:
    return os.cpu_count() or 1


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = int(os.environ.get("MUSKATLAB_THREADS", "0")) or max_threads()
    return max(1, int(threads))
