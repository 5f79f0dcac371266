"""Build script for the optional Cython kernels.

The compiled module ``relaycap._speedups`` is optional: if Cython or a C
compiler is missing the package installs without it and falls back to the
numpy implementation in ``relaycap._fallback``.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("RELAYCAP_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "relaycap._speedups",
                    ["src/relaycap/_speedups.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
