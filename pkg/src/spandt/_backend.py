"""Selection of the compiled core or the numpy fallback.

The compiled extension ``spandt._core`` is used when it imports; setting
``SPANDT_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os

core = None
if os.environ.get("SPANDT_BACKEND", "").lower() != "python":
    try:
        from . import _core as core
    except ImportError:  # extension not built
        core = None

DEFAULT = "cython" if core is not None else "python"


def resolve(name=None):
    """Backend name to use: ``name`` if given, else the import-time default."""
    name = DEFAULT if name is None else name
    if name not in ("cython", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "cython" and core is None:
        raise RuntimeError("compiled core not available; build the extension or use 'python'")
    return name


def available():
    return ["python"] + (["cython"] if core is not None else [])
