"""Build the optional compiled kernels.

The package works without the extension (pure-numpy fallbacks are selected
at import time); building it just makes the hot kernels faster.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "noisegate._kernels._speedups",
                ["src/noisegate/_kernels/_speedups.pyx"],
                include_dirs=[np.get_include()],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
