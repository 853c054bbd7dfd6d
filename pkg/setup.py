#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""The setup script."""

from setuptools import setup, find_packages

with open('README.rst') as readme_file:
    readme = readme_file.read()

requirements = ['torch>=2.2', 'tqdm', 'pandas', 'numpy', 'matplotlib']

setup_requirements = ['pytest-runner']

test_requirements = ['pytest']

setup(
    author="TorchQGML Developers",
    classifiers=[
        'Development Status :: 2 - Pre-Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: BSD License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3.9',
        'Topic :: Scientific/Engineering :: Atmospheric Science',
    ],
    description="Two-layer quasi-geostrophic model with learned sub-grid "
                "closures, online training and Bayesian calibration in "
                "Python and PyTorch.",
    entry_points={
        'console_scripts': ['torchqgml=torchqgml.cli:main'],
    },
    license="BSD license",
    long_description=readme,
    include_package_data=True,
    keywords='torchqgml',
    name='torchqgml',
    packages=find_packages(exclude=['tests', 'tests.*']),
    install_requires=requirements,
    python_requires='>=3.9',
    setup_requires=setup_requirements,
    tests_require=test_requirements,
    test_suite='tests',
    version='0.1.0',
    zip_safe=False,
)
