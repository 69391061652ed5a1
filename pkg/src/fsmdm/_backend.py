"""Pick the schedule executor at import time.

The compiled ``_kernels`` extension is preferred.  Setting
``FSMDM_PURE_PYTHON=1`` forces the pure-Python executor.
"""

import os

from . import _pyexec

python_execute = _pyexec.execute

try:
    from ._kernels import execute as compiled_execute
except ImportError:  # extension not built
    compiled_execute = None

if compiled_execute is not None and not os.environ.get("FSMDM_PURE_PYTHON"):
    BACKEND = "compiled"
    execute = compiled_execute
else:
    BACKEND = "python"
    execute = python_execute


def get_executor(name: str | None = None):
    """Return the executor named ``"compiled"`` or ``"python"`` (default: active one)."""
    if name is None:
        return execute
    if name == "python":
        return python_execute
    if name == "compiled":
        if compiled_execute is None:
            raise RuntimeError("compiled extension fsmdm._kernels is not available")
        return compiled_execute
    raise ValueError(f"unknown backend {name!r}")
