"""Pick the compiled kernels when importable, else the pure-Python twins.

Set ``TRIADLAB_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("TRIADLAB_BACKEND", "").lower() == "python":
    kernels = _fallback
    NAME = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        NAME = "cython"
    except ImportError:
        kernels = _fallback
        NAME = "python"

run_tokens = kernels.run_tokens
run_star = kernels.run_star
first_bad_triple = kernels.first_bad_triple
