from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # numpy/Cython missing: install the pure-Python fallback only
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("depsbm._kernels", ["src/depsbm/_kernels.pyx"], include_dirs=[np.get_include()])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
