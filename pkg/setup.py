from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "crlflood._kernels",
        ["src/crlflood/_kernels.pyx"],
        # keep IEEE semantics so both backends agree bit-for-bit
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
