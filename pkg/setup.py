from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps the compiled stepper free of fused multiply-adds so
# its results stay bit-identical to the pure-Python fallback.
ext = Extension(
    "sphereguide.simcore._kernel",
    ["src/sphereguide/simcore/_kernel.pyx"],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level="3"))
