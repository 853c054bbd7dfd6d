#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# torchqgml documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys
sys.path.insert(0, os.path.abspath('..'))

import torchqgml

# -- General configuration ---------------------------------------------

extensions = ['sphinx.ext.autodoc',
              'sphinx.ext.autosummary',
              'sphinx.ext.coverage',
              'sphinx.ext.doctest',
              'sphinx.ext.intersphinx',
              'sphinx.ext.mathjax',
              'sphinx.ext.napoleon',
              'sphinx.ext.todo',
              'sphinx.ext.viewcode']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

# General information about the project.
project = u'TorchQGML'
copyright = u"2026, TorchQGML developers"
author = u"TorchQGML developers"

# The short X.Y version and the full version.
version = torchqgml.__version__
release = torchqgml.__version__

language = 'en'
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = False

intersphinx_mapping = {'python': ('https://docs.python.org/3', None),
                       'torch': ('https://pytorch.org/docs/stable', None)}

# -- Options for HTML output -------------------------------------------

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'torchqgmldoc'

# -- Options for LaTeX output ------------------------------------------

latex_elements = {}
latex_documents = [
    (master_doc, 'torchqgml.tex',
     u'TorchQGML Documentation',
     u'TorchQGML developers', 'manual'),
]

# -- Options for manual page output ------------------------------------

man_pages = [
    (master_doc, 'torchqgml',
     u'TorchQGML Documentation',
     [author], 1)
]

# -- Options for Texinfo output ----------------------------------------

texinfo_documents = [
    (master_doc, 'torchqgml',
     u'TorchQGML Documentation',
     author,
     'torchqgml',
     'Two-layer QG model with learned closures.',
     'Miscellaneous'),
]
