"""Build script for the compiled kernel extension.

The package works without the extension (a pure-Python twin of the kernel
is selected at import time), so a failed compilation only costs speed.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: extension build skipped ({exc}); "
                  "cuspflow will use the pure-Python kernels", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "cuspflow will use the pure-Python kernels", file=sys.stderr)


def make_extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    # -ffp-contract=off keeps the compiled kernel bit-compatible with the
    # pure-Python twin (no fused multiply-add contraction).
    flags = ["-O2", "-ffp-contract=off"] if not sys.platform.startswith("win") else ["/O2"]
    ext = Extension(
        "cuspflow._kernels._core",
        ["src/cuspflow/_kernels/_core.pyx"],
        extra_compile_args=flags,
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(
    ext_modules=make_extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
