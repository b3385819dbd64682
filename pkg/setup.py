"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a pure-Python
backend with identical semantics is selected at import time), so any
failure to build it is non-fatal for source installs.
"""
import numpy
from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "abpaths._kernels",
                ["src/abpaths/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
