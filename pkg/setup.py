"""Build hook for the optional compiled kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed Cython build must not break installation.
Set SYMILP_SKIP_EXTENSION=1 to force a pure-Python install.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SYMILP_SKIP_EXTENSION") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "symilp.kernels._core",
                    ["src/symilp/kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except Exception:
        ext_modules = []

setup(ext_modules=ext_modules)
