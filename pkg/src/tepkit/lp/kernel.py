"""Backend selection for the simplex iteration kernel.

The compiled extension is used when it imports; otherwise the numpy twin is
loaded. Setting ``TEPKIT_PURE_PYTHON=1`` forces the numpy kernel.
"""

import os

from . import _pykernel

BASIC, AT_LOWER, AT_UPPER, FREE = (_pykernel.BASIC, _pykernel.AT_LOWER,
                                   _pykernel.AT_UPPER, _pykernel.FREE)
OPTIMAL, UNBOUNDED, INFEASIBLE, ITER_LIMIT = (_pykernel.OPTIMAL, _pykernel.UNBOUNDED,
                                              _pykernel.INFEASIBLE, _pykernel.ITER_LIMIT)

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

_KERNELS = {"python": _pykernel}
if _compiled is not None:
    _KERNELS["cython"] = _compiled

if os.environ.get("TEPKIT_PURE_PYTHON", "").strip() not in ("", "0") or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def available() -> tuple[str, ...]:
    return tuple(_KERNELS)


def get(name: str | None = None):
    """Return the kernel module called ``name`` (default: the import-time choice)."""
    name = name or BACKEND
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} not available; have {available()}") from None
