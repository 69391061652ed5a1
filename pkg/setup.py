import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; fsmdm falls back at import
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("FSMDM_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "fsmdm._kernels",
                ["src/fsmdm/_kernels.pyx"],
                include_dirs=[np.get_include()],
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
