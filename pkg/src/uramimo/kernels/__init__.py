"""Hot numeric kernels: compiled extension core with a numpy fallback.

The compiled module is preferred when it imported cleanly; the environment
variable ``URAMIMO_BACKEND`` ("compiled" or "python") or
:func:`set_default_backend` override the choice.  Both implementations obey
the contract documented in :mod:`uramimo.kernels.pyref` and agree to
floating-point tolerance (not bit-for-bit: reduction orders differ).
"""

from __future__ import annotations

import contextlib
import os

from . import pyref

try:
    from . import _cdcore as compiled
except ImportError:  # extension not built; numpy fallback only
    compiled = None

_BACKENDS = {"python": pyref}
if compiled is not None:
    _BACKENDS["compiled"] = compiled

_env = os.environ.get("URAMIMO_BACKEND", "").strip().lower()
_default = _env or ("compiled" if compiled is not None else "python")


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def default_backend() -> str:
    return _default


def set_default_backend(name: str) -> None:
    global _default
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _default = name


def get_backend(name: str | None = None):
    """The kernel module for ``name`` (or the current default)."""
    key = name or _default
    if key == "auto":
        key = "compiled" if compiled is not None else "python"
    if key not in _BACKENDS:
        raise ValueError(f"unknown backend {key!r}; available: {available_backends()}")
    return _BACKENDS[key]


try:
    from threadpoolctl import threadpool_limits as _threadpool_limits
except ImportError:  # pragma: no cover - degrade to whatever BLAS does
    _threadpool_limits = None


def blas_single_thread():
    """Context manager pinning BLAS pools to one thread.

    The descent loop is dominated by rank-one-sized BLAS calls for which
    OpenBLAS threading is a large net loss; detection runs also fan out
    across processes, where nested BLAS threads oversubscribe the machine.
    """
    if _threadpool_limits is None:
        return contextlib.nullcontext()
    return _threadpool_limits(limits=1, user_api="blas")
