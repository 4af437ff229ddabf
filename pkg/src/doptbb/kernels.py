"""Backend selection for the rank-one factorization kernels.

The compiled extension is used when it is importable; setting the environment
variable ``DOPTBB_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("DOPTBB_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python kernels requested")
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

chol_update = _impl.chol_update
chol_downdate = _impl.chol_downdate
chol_downdate_logdet = _impl.chol_downdate_logdet
qr_rank1_update = _impl.qr_rank1_update
pairwise_fw = _impl.pairwise_fw


def available_backends():
    """Map backend name -> kernel module for every importable implementation."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
