"""Hot numeric kernels: compiled extension when available, numpy fallback
otherwise.

Set TENTHCAR_PURE_KERNELS=1 to force the fallback regardless of what was
built; `HAVE_NATIVE` reports whether the extension importable, `IMPL`
which implementation is live.
"""
from __future__ import annotations

import os

try:
    from . import _native  # type: ignore[attr-defined]

    HAVE_NATIVE = True
except ImportError:
    _native = None
    HAVE_NATIVE = False

from . import pure

if HAVE_NATIVE and os.environ.get("TENTHCAR_PURE_KERNELS") != "1":
    _impl = _native
else:
    _impl = pure

IMPL = _impl.IMPL

raycast_segments = _impl.raycast_segments
bilinear_probe = _impl.bilinear_probe
match_accumulate = _impl.match_accumulate
ray_updates = _impl.ray_updates

__all__ = [
    "HAVE_NATIVE",
    "IMPL",
    "raycast_segments",
    "bilinear_probe",
    "match_accumulate",
    "ray_updates",
]
