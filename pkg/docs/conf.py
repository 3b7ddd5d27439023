# -- Path setup --------------------------------------------------------------

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here. If the directory is relative to the
# documentation root, use os.path.abspath to make it absolute, like shown here.
#
# import os
# import sys
# sys.path.insert(0, os.path.abspath('../'))
import os.path
from datetime import datetime
import re

# -- Project information -----------------------------------------------------

# load version number from file in sources dir without importing
with open('../parisihj/version.py') as vfobj:
    vstring = str(vfobj.read())
    version = re.search(r"(\d+.\d+.\d+[-\w]*)", vstring)[0]


project = 'parisihj'
version = version
release = version
copyright = f'{datetime.now().year}, the parisihj developers'


# -- General configuration ---------------------------------------------------

# Add any Sphinx extension module names here, as strings. They can be
# extensions coming with Sphinx (named 'sphinx.ext.*') or your custom
# ones.
extensions = [
    'sphinx.ext.doctest',
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.mathjax',
    'sphinx.ext.todo',
    'sphinx.ext.viewcode',
    'sphinx.ext.napoleon',
    'sphinx_rtd_theme',
    'autodocsumm'
]

todo_include_todos = True
autodoc_member_order = 'bysource'

# Add any paths that contain templates here, relative to this directory.
templates_path = ['_templates']

# List of patterns, relative to source directory, that match files and
# directories to ignore when looking for source files.
# This pattern also affects html_static_path and html_extra_path.
exclude_patterns = ['_build']


# -- Options for HTML output -------------------------------------------------

# The theme to use for HTML and HTML Help pages.  See the documentation for
# a list of builtin themes.
#
html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'collapse_navigation': False
}

# Add any paths that contain custom static files (such as style sheets) here,
# relative to this directory. They are copied after the builtin static files,
# so a file named "default.css" will overwrite the builtin "default.css".
html_static_path = []


# -- Other options -----------------------------------------------------------
doc_cache = os.path.abspath('../doc_cache')

# doctest directive options
doctest_global_setup = f"import os;" \
                       f"os.makedirs('{doc_cache}', exist_ok=True);" \
                       f"import parisihj;" \
                       f"parisihj.Cache.enable_cache('{doc_cache}');" \
                       f"import logging;" \
                       f"logging.getLogger().setLevel(logging.WARNING);"

# options for latexpdf build
latex_elements = {
    'preamble': r'\usepackage{enumitem}\setlistdepth{99}',
}
