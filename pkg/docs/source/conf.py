# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

# The package lives under src/.
import os
import sys
sys.path.insert(0, os.path.abspath('../../src'))

import omrsim


##############################################################################
# Project information.
##############################################################################
project = 'omrsim'
copyright = '2023, Trustees of the University of Pennsylvania'
version = omrsim.__version__
release = omrsim.__version__


##############################################################################
# Config
##############################################################################
# Sphinx extensions.
extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.napoleon',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinxarg.ext',
    'sphinx_rtd_theme']


# Napoleon settings.
napoleon_google_docstring = False
napoleon_numpy_docstring = True
napoleon_include_init_with_doc = False
napoleon_use_param = True
napoleon_use_rtype = True


# Intersphinx.
intersphinx_mapping = {
    'python' : ('https://docs.python.org/3', None),
    'numpy' : ('https://numpy.org/doc/stable', None),
    'scipy' : ('https://docs.scipy.org/doc/scipy/', None),
    'pandas' : ('https://pandas.pydata.org/docs', None),
    'networkx' : ('https://networkx.org/documentation/stable', None),
    'simpy' : ('https://simpy.readthedocs.io/en/latest', None),
}


templates_path = ['_templates']
exclude_patterns = []
pygments_style = 'sphinx'


# Theme.
import sphinx_rtd_theme
html_theme = 'sphinx_rtd_theme'
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_theme_options = {'display_version': True}
