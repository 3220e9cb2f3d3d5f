"""Build script: compiles the optional Cython routing kernel.

The extension is marked optional; if Cython or a C++ toolchain is missing the
package installs anyway and satagg falls back to the pure-Python kernel.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "satagg._kernels._dijkstra",
                ["src/satagg/_kernels/_dijkstra.pyx"],
                language="c++",
                extra_compile_args=["-O2"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
