"""Build the optional compiled kernel; fall back to pure Python when
Cython or a C compiler is unavailable."""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using pure Python")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} not built ({exc}); using pure Python")


try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/bpmncheck/_kernel.pyx"],
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.name = "bpmncheck._kernel"
        ext.extra_compile_args = ["-O2"]
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
