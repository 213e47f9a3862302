"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting
``GRIDLAB_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _lyap_py

try:
    from . import _lyap_core
except ImportError:  # extension not built
    _lyap_core = None

_BACKENDS = {"python": _lyap_py.solve_quasi_triangular}
if _lyap_core is not None:
    _BACKENDS["cython"] = _lyap_core.solve_quasi_triangular

if _lyap_core is not None and not os.environ.get("GRIDLAB_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

solve_quasi_triangular = _BACKENDS[BACKEND]


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def get_kernel(name: str | None = None):
    """Return the triangular Lyapunov kernel for ``name`` (default: active backend)."""
    if name is None:
        name = BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}") from None
