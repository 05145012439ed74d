"""Build shim for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the hot
numeric kernels.  If Cython or a C toolchain is unavailable the build
still succeeds and the package falls back to the numpy kernels at
import time.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize
except ImportError:
    pass
else:
    ext_modules = cythonize(
        [
            Extension(
                "driftlab.kernels._speedups",
                ["src/driftlab/kernels/_speedups.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
