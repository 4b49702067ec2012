import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    USE_CYTHON = True
except ImportError:
    USE_CYTHON = False

ext = Extension(
    "ehbec._kernels",
    ["src/ehbec/_kernels.pyx" if USE_CYTHON else "src/ehbec/_kernels.c"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3"],
    # a failed compile leaves the numpy fallback in charge
    optional=True,
)

extensions = [ext]
if USE_CYTHON:
    extensions = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=extensions)
