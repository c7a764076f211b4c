"""Build shim for the optional compiled kernel extension.

The package is fully functional without the extension (a NumPy/SciPy
fallback is selected at import time), so a failed compile downgrades to a
warning instead of aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler etc.
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python fallback")


def extensions():
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "spinmag.kernels._fast",
        sources=["src/spinmag/kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off keeps the recursions bit-compatible with the
        # lfilter fallback (no FMA contraction).
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
