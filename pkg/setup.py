import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("EDGEMATCH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "edgematch._ckernel",
                    ["src/edgematch/_ckernel.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: the pure-Python fallback must match bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
