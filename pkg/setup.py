"""Build script for the optional compiled kernels.

The package works without the extension; ``mddra._kernels`` falls back to
the numpy implementation when ``mddra._core`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MDDRA_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "mddra._core",
                    ["src/mddra/_core.pyx"],
                    include_dirs=[np.get_include()],
                    # no -ffast-math: results must match the fallback bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
