"""Backend selection for the message-passing kernels.

The compiled extension is preferred when importable; otherwise the numpy
fallback is used.  Set SYMILP_PURE_PYTHON=1 to force the fallback.  Both
implement the same contract and produce bit-identical output.
"""

import os

from . import _core_py

BACKEND = "numpy"
_impl = _core_py

if os.environ.get("SYMILP_PURE_PYTHON") != "1":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass


def edge_aggregate(src, src_idx, dst_idx, weights, num_dst):
    """out[dst_idx[e], :] += weights[e] * src[src_idx[e], :], out is (num_dst, H)."""
    return _impl.edge_aggregate(src, src_idx, dst_idx, weights, num_dst)


def available_backends():
    names = ["numpy"]
    try:
        from . import _core  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names
