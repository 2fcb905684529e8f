"""Build the optional compiled kernels; the package works without them."""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fallback kernels only
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("lieclf._kernels._ckernels", ["src/lieclf/_kernels/_ckernels.pyx"],
                   extra_compile_args=["-O2"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
