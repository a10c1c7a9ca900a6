"""Select the kernel implementation at import time.

The compiled extension is used when it imports; setting the environment
variable ``JSSREG_BACKEND=python`` forces the numpy fallback.
"""
import os

from . import _pykernels

python_kernels = _pykernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("JSSREG_BACKEND", "").lower() != "python":
    kernels = compiled_kernels
    NAME = "cython"
else:
    kernels = python_kernels
    NAME = "python"
