import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "cryptovol._kernels._recursions",
                ["src/cryptovol/_kernels/_recursions.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    # No Cython available: install pure-Python only, kernel selection at
    # import time falls back automatically.
    extensions = []

setup(ext_modules=extensions)
