"""Builds the optional compiled Wilson kernel; the package works without it."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("LATINDEX_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        import numpy  # noqa: F401
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            ["src/latindex/_kernels.pyx"],
            compiler_directives={"language_level": "3"},
            quiet=True,
        )
        for ext in ext_modules:
            ext.extra_compile_args = ["-O3"]

setup(ext_modules=ext_modules)
