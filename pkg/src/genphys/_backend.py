"""Pick the compiled core when it imports, else the NumPy twin.

Set ``GENPHYS_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the tests that compare the two implementations).
"""

import os

from . import _core_py

if os.environ.get("GENPHYS_PURE_PYTHON", "") not in ("", "0"):
    core = _core_py
    NAME = "python"
else:
    try:
        from . import _core as core  # type: ignore[attr-defined]
        NAME = "cython"
    except ImportError:  # extension not built
        core = _core_py
        NAME = "python"

kv_pair = core.kv_pair
jy = core.jy
posterior_reduce = core.posterior_reduce

__all__ = ["NAME", "core", "kv_pair", "jy", "posterior_reduce"]
