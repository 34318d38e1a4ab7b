"""Build script for the optional compiled kernels.

The extension is a speedup only: every routine in loopslam._kernels_c has a
bit-identical numpy fallback in loopslam.kernels._numpy, and the package
imports fine if compilation is unavailable.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "loopslam._kernels_c",
        sources=["src/loopslam/_kernels_c.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
