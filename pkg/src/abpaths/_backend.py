"""Import-time selection of the compute-kernel backend.

The compiled extension is preferred when importable; the pure-Python
reference backend is the fallback and can be forced with the
environment variable ``ABPATHS_BACKEND=python`` (``compiled`` forces
the extension and raises if it is missing, which the benchmark and the
backend-equivalence tests use).
"""
import os

_requested = os.environ.get("ABPATHS_BACKEND", "").strip().lower()

if _requested == "python":
    from abpaths import _kernels_py as kernels
    BACKEND = "python"
elif _requested == "compiled":
    from abpaths import _kernels as kernels  # noqa: F401  (may raise)
    BACKEND = "compiled"
else:
    try:
        from abpaths import _kernels as kernels
        BACKEND = "compiled"
    except ImportError:
        from abpaths import _kernels_py as kernels
        BACKEND = "python"

ascending_series = kernels.ascending_series
miller_ladder = kernels.miller_ladder
accumulate_angles = kernels.accumulate_angles
