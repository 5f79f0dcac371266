"""Backend selection for the hot cut-evaluation kernels.

The compiled extension ``relaycap._speedups`` is used when it imports;
otherwise the numpy fallback is used. Setting ``RELAYCAP_PURE_PYTHON=1``
forces the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("RELAYCAP_PURE_PYTHON", "") != "1":
    try:
        from . import _speedups as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

gaussian_logdet_real = _impl.gaussian_logdet_real
gaussian_logdet_complex = _impl.gaussian_logdet_complex
erasure_value = _impl.erasure_value
gfp_rank = _impl.gfp_rank
cut_terms_real = _impl.cut_terms_real
cut_terms_complex = _impl.cut_terms_complex


def backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _fallback}
    try:
        from . import _speedups

        out["cython"] = _speedups
    except ImportError:
        pass
    return out
