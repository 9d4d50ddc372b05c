"""Build script: compiles the optional fast kernels when Cython is available.

The package is fully functional without the extension; dfotr._kernels falls
back to the pure NumPy implementation at import time.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/dfotr/_kernels/_native.pyx",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
