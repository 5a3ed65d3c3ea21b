from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # numpy kernel fallback is used at runtime
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("tepkit.lp._kernel", ["src/tepkit/lp/_kernel.pyx"],
                   extra_compile_args=["-O3"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
