#!/usr/bin/env python
# Copyright (c) 2023, Trustees of the University of Pennsylvania
# See LICENSE for licensing conditions
from pathlib import Path
import re

from setuptools import setup, find_packages


def get_version():
    init = Path(__file__).parent / 'src' / 'omrsim' / '__init__.py'
    m = re.search(r"^__version__ = '([^']+)'", init.read_text(), re.M)
    return m.group(1)


setup(
    #Package.
    package_dir = {'' : 'src'},
    packages=find_packages(where='src', exclude=['tests', '__pycache__']),
    entry_points={'console_scripts' : ['omrsim=omrsim.cli:main',],},
    include_package_data=True,
    # Requirements.
    python_requires='>=3.8',
    install_requires=[
        'networkx>=2.6',
        'numpy>=1.16.5',
        'pandas>=1.3.0',
        'PyYAML>=5.4',
        'scipy>=1.7.0',
        'simpy>=4.0.1',
        'tqdm>=4.38.0'],
    extras_require={
        'testing' : ['hypothesis',
                     'pytest',
                     'pytest-mock'],
        'doc' : ['docutils==0.18.0',
                 'Sphinx==5.3.0',
                 'sphinx-argparse',
                 'sphinx_rtd_theme==1.2.0rc3']
        },
    # Versioning.
    version=get_version(),
    # PyPI.
    name='omrsim',
    description='Simulator for multi-modal converge-cast routing in '
                'underwater acoustic networks.')
