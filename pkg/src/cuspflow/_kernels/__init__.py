"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python twin
is the fallback.  Set CUSPFLOW_BACKEND=python (or =c) to force a choice.
"""

import os

_choice = os.environ.get("CUSPFLOW_BACKEND", "").strip().lower()

if _choice in ("", "auto", "c"):
    try:
        from . import _core as _impl
        BACKEND = "c"
    except ImportError:
        if _choice == "c":
            raise
        from . import pure as _impl
        BACKEND = "python"
elif _choice in ("python", "pure", "py"):
    from . import pure as _impl
    BACKEND = "python"
else:
    raise RuntimeError(f"unknown CUSPFLOW_BACKEND value {_choice!r}")

local_reduce = _impl.local_reduce
integrate_ray_raw = _impl.integrate_ray_raw

METRIC_HYP = 0
METRIC_WP = 1

EV_ENTER = 1
EV_APEX = 2
EV_EXIT = 3
EV_CUT = 4

ST_TIME = 0
ST_EXCURSIONS = 1
ST_UNDERFLOW = 2
ST_MAXSTEPS = 3
ST_OVERFLOW = 4
