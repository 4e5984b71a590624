"""Hot-kernel dispatch: the compiled ``_accel`` extension when it is built,
otherwise the pure-Python twin in ``_purepy``.

Set ``MOTORDYN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _purepy

_impl = _purepy
if os.environ.get("MOTORDYN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _accel as _impl  # noqa: F811
    except ImportError:  # extension not built
        _impl = _purepy

BACKEND = _impl.BACKEND

rk4_motor = _impl.rk4_motor
simulate_closed_loop = _impl.simulate_closed_loop
diag_scan_forward = _impl.diag_scan_forward
diag_scan_backward = _impl.diag_scan_backward


def available_backends():
    """Return ``{name: module}`` for every importable kernel backend."""
    out = {"python": _purepy}
    try:
        from . import _accel
    except ImportError:
        return out
    out["cython"] = _accel
    return out
