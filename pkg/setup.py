import os

from setuptools import setup

ext_modules = []
if os.environ.get("OTPALM_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "otpalm._kernels_c",
                    ["src/otpalm/_kernels_c.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # pure-Python fallback is selected at import
        ext_modules = []

setup(ext_modules=ext_modules)
