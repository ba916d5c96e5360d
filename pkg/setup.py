from setuptools import setup, Extension
from Cython.Build import cythonize
import numpy as np


# -ffp-contract=off: no FMA contraction, so results stay bit-identical with
# the pure-Python kernel on any build host.
ext = Extension(
    "neural_sa._kernel",
    ["src/neural_sa/_kernel.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
