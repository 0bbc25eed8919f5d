"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set GAILBIAS_NO_EXT=1 to skip compilation entirely.
"""
import os

import numpy as np
from setuptools import Extension, setup

extensions = []
if not os.environ.get("GAILBIAS_NO_EXT"):
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "gailbias.kernels._core",
                ["src/gailbias/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
