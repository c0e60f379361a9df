"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); the build therefore tolerates a missing compiler or Cython
and installs pure-Python in that case.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "photovo._kernels.native",
                ["src/photovo/_kernels/native.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"photovo: building without compiled kernels ({exc})\n")

setup(ext_modules=ext_modules)
