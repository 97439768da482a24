import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install, kernels fall back to numpy/scipy
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("BANKGCN_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "bankgcn._ckernels",
                ["src/bankgcn/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
