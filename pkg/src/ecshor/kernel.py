"""Kernel selection: compiled extension if built, pure-Python fallback.

Set ``ECSHOR_PURE_PYTHON=1`` to force the fallback (used by the kernel
parity tests and the benchmark).
"""
from __future__ import annotations

import os

from . import kernel_py

if os.environ.get("ECSHOR_PURE_PYTHON"):
    impl = kernel_py
else:
    try:
        from . import _kernel as impl  # type: ignore[attr-defined]
    except ImportError:
        impl = kernel_py

simulate_packed = impl.simulate_packed
count_packed = impl.count_packed
IS_COMPILED = impl.IS_COMPILED
