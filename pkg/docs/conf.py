#!/usr/bin/env python
#
# Sphinx configuration of the PyBLGCN documentation.
#
# The API pages are generated by autodoc from the numpy-style docstrings of
# the `pyblgcn` package, so the package must be importable from here.

import os
import sys
sys.path.insert(0, os.path.abspath('..'))

import pyblgcn

# -- General configuration ---------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx_rtd_theme'
]

# Autodoc settings
autoclass_content = 'both'
autodoc_member_order = 'bysource'

# Napoleon settings
napoleon_numpy_docstring = True
napoleon_google_docstring = False
napoleon_include_init_with_doc = True
napoleon_include_special_with_doc = True
napoleon_use_param = True
napoleon_use_rtype = True

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'PyBLGCN'
copyright = "2022, PyBLGCN Developers"
author = "PyBLGCN Developers"

# The short X.Y version and the full version, including alpha/beta/rc tags
version = pyblgcn.__version__
release = pyblgcn.__version__

language = 'en'
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output -------------------------------------------

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'pyblgcndoc'

# -- Options for other outputs -----------------------------------------

latex_documents = [
    (master_doc, 'pyblgcn.tex', 'PyBLGCN Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'blgcn', 'PyBLGCN Documentation', [author], 1)
]

texinfo_documents = [
    (
        master_doc, 'PyBLGCN', 'PyBLGCN Documentation', author,
        'PyBLGCN',
        'Superpixel graph classification of hyperspectral images.',
        'Miscellaneous'
    ),
]
