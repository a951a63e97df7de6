"""Backend selection for the hot kernels.

The simulation kernels exist in two functionally identical lanes: a numba
@njit lane and a plain numpy/Python reference lane. The lane is chosen by
the NBREWIRE_BACKEND environment variable ("numba" or "python"); default
is numba when importable. Per-call overrides are accepted everywhere a
backend matters.
"""

from __future__ import annotations

import os

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAS_NUMBA = False

_ENV_VAR = "NBREWIRE_BACKEND"
_VALID = ("numba", "python")


def default_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice in _VALID:
        if choice == "numba" and not HAS_NUMBA:
            raise RuntimeError("NBREWIRE_BACKEND=numba but numba is not importable")
        return choice
    return "numba" if HAS_NUMBA else "python"


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in _VALID:
        raise ValueError(f"unknown backend {backend!r}; expected one of {_VALID}")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def set_num_threads(threads: int | None) -> None:
    if threads is None or not HAS_NUMBA:
        return
    import numba

    numba.set_num_threads(max(1, int(threads)))
