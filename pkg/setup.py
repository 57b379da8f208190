"""Build script for the compiled kNN core.

The extension is optional: vortexseg falls back to a pure-numpy
implementation of the same kernels when the compiled module is missing
(see vortexseg.graph). Both paths are contractually bit-identical, which
is why -ffp-contract=off is forced: FMA contraction would round the
squared-distance accumulation differently from numpy.
"""

import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "vortexseg._core",
        ["src/vortexseg/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
