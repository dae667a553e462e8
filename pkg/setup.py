"""Build script: compiles the optional native kernel extension.

The package is fully functional without the extension (a pure numpy
fallback is selected at import time); set TENTHCAR_SKIP_NATIVE=1 to skip
compilation on hosts without a C toolchain.
"""
import os
import sys

from setuptools import Extension, setup


def native_extensions():
    if os.environ.get("TENTHCAR_SKIP_NATIVE") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        print("tenthcar: Cython/numpy unavailable, building without native kernels",
              file=sys.stderr)
        return []
    ext = Extension(
        "tenthcar.kernels._native",
        ["src/tenthcar/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=native_extensions())
