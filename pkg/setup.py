import os

from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
if os.environ.get("TUMORCP_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "tumorcp.kernels._core",
                    ["src/tumorcp/kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython/numpy at build time: install runs on the NumPy fallback.
        ext_modules = []

setup(ext_modules=ext_modules)
