"""Build script for the optional compiled ODE kernel.

The package is fully functional without the extension (a pure-Python
fallback with the same stepper is selected at import time), so the build
degrades gracefully when Cython or a C compiler is unavailable.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "bogoflow.kernels._dopri",
                ["src/bogoflow/kernels/_dopri.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
