from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "doptbb._kernels",
                ["src/doptbb/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # no Cython: the package falls back to doptbb._kernels_py at import
    extensions = []

setup(ext_modules=extensions)
