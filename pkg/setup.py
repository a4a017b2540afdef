from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension("spandt._core", ["src/spandt/_core.pyx"], extra_compile_args=["-O3"])

setup(ext_modules=cythonize([ext], language_level=3))
