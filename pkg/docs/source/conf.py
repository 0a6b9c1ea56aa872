# Configuration file for the Sphinx documentation builder.
#
# For the full list of options see:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys

sys.path.insert(0, os.path.abspath('../../src'))

# -- Project information -----------------------------------------------------
from resesop import __version__ as package_version

project = 'resesop-tool'
copyright = '2026, resesop-tool contributors'
author = 'resesop-tool contributors'

# The full version, including alpha/beta/rc tags
release = package_version

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',  # html from docstrings
    'sphinx.ext.autosummary',  # summary tables
    'sphinx.ext.mathjax',
]
autosummary_generate = True
autodoc_member_order = 'bysource'

exclude_patterns = []

# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
