"""Build script: compiles the optional C extension holding the hot kernels.

The package works without the extension (a pure-Python twin is selected at
import time), so any failure here downgrades to a warning instead of
aborting the install.  Set METABIAS_SKIP_EXTENSION=1 to skip the compile
deliberately.
"""

import os
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that tolerates a missing or broken C toolchain."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python lane")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"building {ext.name} failed ({exc}); using pure-Python lane")


ext_modules = []
if os.environ.get("METABIAS_SKIP_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "metabias._core._ckernels",
                    ["src/metabias/_core/_ckernels.pyx"],
                    # fp-contract off keeps results bit-comparable with the
                    # pure-Python lane (no FMA rounding differences)
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level="3",
        )
    except ImportError:
        warnings.warn("Cython not available; using pure-Python lane")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
