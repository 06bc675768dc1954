"""Hot kernels: compiled extension when built, pure Python otherwise.

Set ``DATACAPSULE_PURE_KERNELS=1`` to force the fallback.
"""

import os

if os.environ.get("DATACAPSULE_PURE_KERNELS") == "1":
    from ._gf_py import matvec, solve_left

    BACKEND = "python"
else:
    try:
        from ._gf_ext import matvec, solve_left

        BACKEND = "cython"
    except ImportError:
        from ._gf_py import matvec, solve_left

        BACKEND = "python"

__all__ = ["BACKEND", "matvec", "solve_left"]
