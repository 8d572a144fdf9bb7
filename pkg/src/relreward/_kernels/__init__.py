"""Stemming kernel with a compiled fast path and a pure-Python fallback.

The compiled extension (``_cstem``) is preferred when it was built; setting
``RELREWARD_PURE_PYTHON=1`` forces the pure backend.  Both expose the same
two functions and are parity-tested against each other.
"""

from __future__ import annotations

import os

from . import pure

if os.environ.get("RELREWARD_PURE_PYTHON"):
    _backend = pure
    BACKEND = "pure"
else:
    try:
        from . import _cstem as _backend  # type: ignore[no-redef]

        BACKEND = "c"
    except ImportError:
        _backend = pure
        BACKEND = "pure"

stem = _backend.stem
stem_words = _backend.stem_words

__all__ = ["BACKEND", "pure", "stem", "stem_words"]
