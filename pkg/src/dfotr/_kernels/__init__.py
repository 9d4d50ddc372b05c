"""Hot numerical kernels with a compiled core and a pure NumPy fallback.

The compiled extension is used when importable; set DFOTR_PURE_PYTHON=1 to
force the fallback. ``BACKEND`` reports which one is active.
"""

import os

from . import _pure

if os.environ.get("DFOTR_PURE_PYTHON", "") == "1":
    _impl = _pure
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

BACKEND = _impl.BACKEND
quad_value_grad = _impl.quad_value_grad
steihaug = _impl.steihaug

__all__ = ["BACKEND", "quad_value_grad", "steihaug"]
