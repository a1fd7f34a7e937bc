"""Build the optional compiled core.  The package works without it."""

import os
import sys

import numpy
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("RCPANEL_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "rcpanel._kernels",
                    ["src/rcpanel/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("Cython not available; installing the pure-Python backend only",
              file=sys.stderr)

setup(ext_modules=ext_modules)
