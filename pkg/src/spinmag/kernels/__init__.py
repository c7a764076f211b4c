"""Backend selection for the sequential kernels.

The compiled extension is preferred when importable; otherwise the
scipy/pure-Python reference backend is used.  Set ``SPINMAG_BACKEND=ref`` or
``SPINMAG_BACKEND=fast`` to force a choice (``fast`` raises if the extension
is missing).  ``BACKEND`` records which one is active.
"""

import os

_requested = os.environ.get("SPINMAG_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "fast", "ref"):
    raise ImportError(
        f"SPINMAG_BACKEND must be 'auto', 'fast' or 'ref', got {_requested!r}"
    )

if _requested == "ref":
    from . import _ref as _impl

    BACKEND = "ref"
else:
    try:
        from . import _fast as _impl

        BACKEND = "fast"
    except ImportError:
        if _requested == "fast":
            raise
        from . import _ref as _impl

        BACKEND = "ref"

ar1_real = _impl.ar1_real
ar1_complex = _impl.ar1_complex
onepole_cascade_real = _impl.onepole_cascade_real
onepole_cascade_complex = _impl.onepole_cascade_complex
bloch_rk4 = _impl.bloch_rk4

__all__ = [
    "BACKEND",
    "ar1_real",
    "ar1_complex",
    "onepole_cascade_real",
    "onepole_cascade_complex",
    "bloch_rk4",
]
