"""Hot-loop kernels, compiled when available.

The Cython build (``splicenet._ckernels``) is preferred at import. Set
``SPLICENET_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
correlate3x3_valid = _pykernels.correlate3x3_valid
lbp_codes = _pykernels.lbp_codes
row_moments = _pykernels.row_moments

if not os.environ.get("SPLICENET_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None
    else:
        BACKEND = "cython"
        correlate3x3_valid = _ckernels.correlate3x3_valid
        lbp_codes = _ckernels.lbp_codes
        row_moments = _ckernels.row_moments

__all__ = ["BACKEND", "correlate3x3_valid", "lbp_codes", "row_moments"]
