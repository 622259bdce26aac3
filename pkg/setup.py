"""Build script for the optional compiled propagation kernel.

The package works without it: ``quasisquare.tdse`` falls back to the pure
Python kernel when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("QUASISQUARE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "quasisquare._kernel",
                    ["src/quasisquare/_kernel.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
