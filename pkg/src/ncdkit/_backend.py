"""Select the compiled kernels when available, else the pure-Python ones.

Set ``NCDKIT_PURE=1`` to force the fallback.
"""

import os

if os.environ.get("NCDKIT_PURE", "").strip() not in ("", "0"):
    from . import _pykernels as kernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        from . import _pykernels as kernels

BACKEND = kernels.BACKEND
COMPILED = BACKEND == "cython"


def available():
    """Mapping of backend name to kernel module for every importable backend."""
    from . import _pykernels

    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
