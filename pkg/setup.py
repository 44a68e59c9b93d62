from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # the numpy kernels are used when the extension is missing
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("eqyamabe._kernels", ["src/eqyamabe/_kernels.pyx"], extra_compile_args=["-O3"], optional=True)],
        language_level=3,
    )

setup(ext_modules=ext_modules)
