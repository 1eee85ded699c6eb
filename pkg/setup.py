"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy implementation of the same
kernels is selected at import time), so the build is marked optional and a
failed compile degrades to the pure path instead of breaking the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vbdrop._kernels_c",
                ["src/vbdrop/_kernels_c.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
