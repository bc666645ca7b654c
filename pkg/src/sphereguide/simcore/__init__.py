"""Simulation stepper with compiled core and pure-Python fallback.

The compiled extension is preferred when importable; set the environment
variable ``SPHEREGUIDE_PURE_SIM=1`` to force the pure-Python stepper.  Both
produce bit-identical results (enforced by tests), so the switch only
affects speed.
"""
import os

from . import pystep

_force_pure = os.environ.get("SPHEREGUIDE_PURE_SIM", "") not in ("", "0")

if _force_pure:
    _impl = pystep
else:
    try:
        from . import _kernel as _impl
    except ImportError:
        _impl = pystep

USING_COMPILED = bool(getattr(_impl, "COMPILED", False))


def run_window(state, coef, pack, n_sub):
    """Advance one action window; returns (new_state (26,), diverged flag)."""
    return _impl.run_window(state, coef, pack, n_sub)
