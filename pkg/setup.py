from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "beliefpomdp.kernels._sweep",
                ["src/beliefpomdp/kernels/_sweep.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Without Cython the package still works on the numpy backend.
    extensions = []

setup(ext_modules=extensions)
