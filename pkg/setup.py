"""Build script for the optional compiled kernel core.

The package is fully functional without the extension: acppo._kernels falls
back to the numpy implementation at import time. The extension only
accelerates the hot kernels (discount scans, MLP forward/backward, Adam).
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "acppo._kernels._native",
                ["src/acppo/_kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
