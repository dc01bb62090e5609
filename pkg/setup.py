# -*- coding: utf-8 -*-
from setuptools import setup, find_packages

version = {}
with open('gastwin/version.py') as fp:
    exec(fp.read(), version)
VERSION = version['__version__']

setup(name='gastwin',
      version=VERSION,
      description='Hybrid attention transformer for methane plume '
                  'segmentation and diet classification',
      license='MIT',
      packages=find_packages(exclude=['test']),
      python_requires='>=3.8',
      install_requires=[
          'numpy>=1.17',
          'pandas>=1.5',
          'scikit-image',
          'scikit-learn',
          'tqdm',
          'matplotlib'
      ],
      entry_points={
          'console_scripts': ['gastwin=gastwin.cli:main']
      },
      include_package_data=True,
      zip_safe=False)
