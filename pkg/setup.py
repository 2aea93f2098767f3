"""Build script: compiles the hot-loop extension when Cython + a C compiler
are available, and degrades to the pure-Python package otherwise (the kernels
module falls back automatically at import time)."""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "spectralstrip._kernels",
                ["src/spectralstrip/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("Cython not available; building without the compiled kernels.")

setup(ext_modules=ext_modules)
