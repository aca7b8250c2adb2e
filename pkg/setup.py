import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "hdldev.ctmc._kernel",
    ["src/hdldev/ctmc/_kernel.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    # no FMA contraction: keeps results bit-identical to the Python twin
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
