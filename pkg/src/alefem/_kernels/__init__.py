"""Assembly kernel backend selection.

Prefers the compiled extension; falls back to the numpy reference
implementation when the extension is missing or ALEFEM_PURE is set.
"""

import os

from . import fallback

if os.environ.get("ALEFEM_PURE"):
    _impl = fallback
    HAVE_COMPILED = False
else:
    try:
        from . import _core as _impl

        HAVE_COMPILED = True
    except ImportError:
        _impl = fallback
        HAVE_COMPILED = False

backend_name = "compiled" if HAVE_COMPILED else "numpy"

stiffness_locals = _impl.stiffness_locals
motion_locals = _impl.motion_locals
load_locals = _impl.load_locals
