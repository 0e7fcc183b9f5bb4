"""Kernel backend selection.

The compiled kernel is used when it imports; ``HSPS_BACKEND=python`` forces
the pure-Python one, ``HSPS_BACKEND=compiled`` makes a missing extension an
error.
"""

from __future__ import annotations

import importlib
import logging
import os

log = logging.getLogger(__name__)

BACKENDS = ("compiled", "python")
_MODULES = {"compiled": "hsps.simkernel._ckernel", "python": "hsps.simkernel._pykernel"}


def load(name: str):
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; choose from {BACKENDS}")
    return importlib.import_module(_MODULES[name])


def available() -> list[str]:
    names = []
    for name in BACKENDS:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select():
    wanted = os.environ.get("HSPS_BACKEND", "auto").lower()
    if wanted in BACKENDS:
        return load(wanted)
    if wanted != "auto":
        raise ValueError(f"HSPS_BACKEND must be auto, compiled or python, not {wanted!r}")
    try:
        return load("compiled")
    except ImportError:
        log.info("compiled kernel unavailable, using the pure-Python kernel")
        return load("python")


kernel = _select()
DEFAULT = kernel.BACKEND
