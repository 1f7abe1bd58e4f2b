"""Kernel dispatch: compiled (numba) and pure-python paths for every hot loop.

Each hot kernel in this package is written once as a plain python function
and wrapped in a :class:`DualKernel`, which holds the original (``.py``) and,
when numba is importable, an ``@njit``-compiled twin (``.nb``).  Calls go to
whichever side the active backend selects.  The two sides consume random
slots identically and agree bitwise, which the test suite checks; benchmarks
call ``.py`` / ``.nb`` directly to compare them.

Backend selection order: ``set_backend()`` in-process, else the
``LOOPTREES_BACKEND`` environment variable (``numba`` or ``numpy``), else
numba when available.

The pure-python side runs kernel arithmetic on numpy scalars, where uint64
wrap-around raises ``RuntimeWarning`` (array ops wrap silently, scalar ops
warn).  The wrap is intentional in the mixing functions, so the dispatcher
suppresses that warning class around pure-python kernel calls.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit
    from numba.extending import register_jitable

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def register_jitable(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


#: decorator for helpers that kernels call: inlined under numba, plain
#: python otherwise.  Defined once, usable from both sides.
jitable = register_jitable


def _initial_backend() -> str:
    env = os.environ.get("LOOPTREES_BACKEND", "").strip().lower()
    if env in ("numba", "nb"):
        if not HAS_NUMBA:
            raise RuntimeError("LOOPTREES_BACKEND=numba but numba is not importable")
        return "numba"
    if env in ("numpy", "python", "py"):
        return "numpy"
    if env:
        raise RuntimeError(f"unrecognized LOOPTREES_BACKEND value: {env!r}")
    return "numba" if HAS_NUMBA else "numpy"


_backend = _initial_backend()


def current_backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name: str) -> None:
    """Switch kernel dispatch in-process.  Overrides the environment flag."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"backend must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _backend = name


class DualKernel:
    """Callable pair (pure python, numba-compiled) behind one name."""

    def __init__(self, pyfunc, nbfunc):
        # numpy>=1.25 warns on wrapping uint64 *scalar* arithmetic, which the
        # mixing kernels rely on; arrays wrap silently either way.
        def _quiet(*args):
            with np.errstate(over="ignore"):
                return pyfunc(*args)

        self.py = _quiet
        self.py_raw = pyfunc
        self.nb = nbfunc
        self.__name__ = pyfunc.__name__
        self.__doc__ = pyfunc.__doc__
        self.__wrapped__ = pyfunc

    def __call__(self, *args):
        if _backend == "numba":
            return self.nb(*args)
        return self.py(*args)

    def __repr__(self):
        return f"<DualKernel {self.__name__} backend={_backend}>"


def kernel(func):
    """Wrap ``func`` as a :class:`DualKernel`.

    The compiled twin is built eagerly with ``cache=True`` so repeat runs in
    the same environment skip compilation, and ``nogil=True`` so threaded
    replicate loops can overlap kernel execution.
    """
    if HAS_NUMBA:
        return DualKernel(func, njit(cache=True, nogil=True)(func))
    return DualKernel(func, func)
