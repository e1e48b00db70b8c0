"""Build script: the compiled kernel is optional; without it the pure-Python
stepper is used."""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "proxflow._kernels",
        ["src/proxflow/_kernels.pyx"],
        include_dirs=[np.get_include()],
        language="c++",
        extra_compile_args=["-O2", "-ffp-contract=off"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3, quiet=True)

setup(ext_modules=ext_modules)
