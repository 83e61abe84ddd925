"""Backend selection for the trajectory recursion.

The compiled kernel is used when the extension was built; otherwise the
pure-Python loop is used.  Both follow the same contract.
"""

from . import _propagate_py

try:
    from . import _propagate as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _propagate_py.propagate}
if _compiled is not None:
    BACKENDS["cython"] = _compiled.propagate

DEFAULT_BACKEND = "cython" if _compiled is not None else "python"


def get_kernel(backend: str | None = None):
    name = backend or DEFAULT_BACKEND
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    return BACKENDS[name]
