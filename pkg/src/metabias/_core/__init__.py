"""Numeric kernel backend selection.

The compiled extension ``_ckernels`` (Cython) is preferred when importable;
otherwise the pure-Python twin ``pykernels`` is used.  Setting the
environment variable ``METABIAS_PURE_PYTHON=1`` forces the pure lane, which
is useful for benchmarking and debugging.

Both lanes expose the same functions with the same semantics; the test
suite asserts cross-lane agreement.
"""

import os

from . import pykernels

if os.environ.get("METABIAS_PURE_PYTHON") == "1":
    kernels = pykernels
else:
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = pykernels

BACKEND = kernels.BACKEND


def backend_name() -> str:
    """Name of the active kernel lane: 'compiled' or 'python'."""
    return BACKEND
