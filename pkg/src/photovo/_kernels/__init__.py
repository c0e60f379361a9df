"""Hot-kernel backend selection.

At import time the compiled Cython extension is preferred; the numpy
fallback is used when it is missing (pure-Python install) or when
PHOTOVO_KERNELS=numpy is set. PHOTOVO_KERNELS=native insists on the
extension and raises if it cannot be imported.

Both backends expose the same functions with matching semantics:
bilinear_many, accumulate_system, block_match, sad_cost_volume.
"""

import os

from . import numpy_backend

_requested = os.environ.get("PHOTOVO_KERNELS", "").strip().lower()

if _requested == "numpy":
    _impl = numpy_backend
elif _requested == "native":
    from . import native as _impl  # noqa: F401 - import error is the point
else:
    try:
        from . import native as _impl
    except ImportError:
        _impl = numpy_backend

bilinear_many = _impl.bilinear_many
accumulate_system = _impl.accumulate_system
block_match = _impl.block_match
sad_cost_volume = _impl.sad_cost_volume


def backend_name() -> str:
    return _impl.NAME


def get_backend(name: str):
    """Explicit backend lookup, used by the benchmark and parity tests."""
    if name == "numpy":
        return numpy_backend
    if name == "native":
        from . import native

        return native
    raise ValueError(f"unknown kernel backend {name!r}")
