"""Backend selection for the element-integration kernels.

The compiled extension is used when it has been built; setting the
environment variable ``FRACBEM_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
integrate_elements = _kernels_py.integrate_elements

if os.environ.get("FRACBEM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import integrate_elements  # noqa: F811
        BACKEND = "compiled"
    except ImportError:  # extension not built
        pass

__all__ = ["BACKEND", "integrate_elements"]
