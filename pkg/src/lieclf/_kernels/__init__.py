"""Kernel backend selection.

The compiled module is used when it was built; otherwise, or when the
environment variable ``LIECLF_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the pure-Python fallback is used. ``BACKEND`` names the choice.
"""
import os

from . import _pykernels
from .opcodes import ERR_EMPTY, ERR_KINK, ERR_NONFINITE, OK

_force_py = os.environ.get("LIECLF_PURE_PYTHON", "") not in ("", "0")

_compiled = None
if not _force_py:
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = "compiled" if _compiled is not None else "python"

eval_programs = _impl.eval_programs
eval_field = _impl.eval_field
integrate_word = _impl.integrate_word


def compiled_available() -> bool:
    return _compiled is not None


def backends() -> dict:
    """All importable backends by name, for parity tests and benchmarks."""
    out = {"python": _pykernels}
    if _compiled is not None:
        out["compiled"] = _compiled
    else:
        try:
            from . import _ckernels

            out["compiled"] = _ckernels
        except ImportError:
            pass
    return out
