"""Build the optional compiled SGD kernel.

The extension is skipped when Cython is unavailable or when
DYANN_PURE_PYTHON is set; the package then falls back to the pure
Python training loop at import time.
"""
import os
import warnings

from setuptools import Extension, setup

extensions = []
if not os.environ.get("DYANN_PURE_PYTHON"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not found; building without the compiled "
                      "kernel")
    else:
        extensions = cythonize(
            [
                Extension(
                    "dyann._speedups",
                    sources=["src/dyann/_speedups.pyx"],
                    # no fast-math / fp-contraction: results must be
                    # bit-identical to the pure Python loop
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=extensions)
