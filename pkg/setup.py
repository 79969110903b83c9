import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "nispdg._kernels._dg_core",
                sources=["src/nispdg/_kernels/_dg_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

# The compiled core is an accelerator only; the package falls back to the
# pure-numpy kernels when the build is unavailable.
for ext in extensions:
    ext.optional = True

setup(ext_modules=extensions)
