# Configuration file for the Sphinx documentation builder.
import os
import sys
sys.path.insert(0, os.path.abspath('../src'))

from mtmc import __version__

# Project information
project = 'MTMC'
copyright = '2026, MTMC developers'
author = 'MTMC developers'

version = '.'.join(__version__.split('.')[:2])
release = __version__

# Extensions
extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx_copybutton',
]

# Theme
html_theme = 'pydata_sphinx_theme'
html_title = "MTMC Documentation"
html_show_sourcelink = False

html_theme_options = {
    'show_prev_next': True,
}

html_context = {
    'default_mode': 'light'
}

html_sidebars = {
    "**": []
}

# Options
templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store', 'README.md']

# Intersphinx
intersphinx_mapping = {
    'python': ('https://docs.python.org/3/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
}

# Copy button
copybutton_prompt_text = r">>> |\.\.\. |\$ |In \[\d*\]: | {2,5}\.\.\.: | {5,8}: "
copybutton_prompt_is_regexp = True
