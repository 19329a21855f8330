"""Build script for the optional compiled path kernel.

The package works without the extension (a pure-Python kernel is selected at
import time), so failure to build it is non-fatal for source installs where
Cython or a C toolchain is missing.
"""

import os

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    # The single-stream C samplers live in a static library shipped inside
    # numpy; without it the extension fails to link at import time.
    numpy_random_lib = os.path.join(os.path.dirname(np.random.__file__), "lib")
    extension = Extension(
        "levylv._core",
        ["src/levylv/_core.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[numpy_random_lib],
        libraries=["npyrandom"],
        # -ffp-contract=off: the compiled kernel must be bit-identical to the
        # pure-Python kernel, so fused multiply-add contraction is disallowed.
        extra_compile_args=["-O2", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([extension], language_level=3)

setup(ext_modules=ext_modules)
