import os
import sys

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
# tiny per-step zeroing loops are faster inline than as memset calls
gcc_only = [] if sys.platform == "darwin" else ["-fno-tree-loop-distribute-patterns"]

ext_modules = []
if not os.environ.get("UFGKIT_NO_EXT"):
    ext_modules = cythonize(
        Extension(
            "ufgkit.sdesim._kernel",
            ["src/ufgkit/sdesim/_kernel.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"] + gcc_only + openmp,
            extra_link_args=openmp,
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        ),
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
