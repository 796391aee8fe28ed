# -*- coding: utf-8 -*-

"""Documentation build configuration file for the `lumifit` package."""

import os
import sys

# Add the 'lumifit' source distribution's root directory to the module path.
sys.path.insert(0, os.path.abspath('..'))

# -- General configuration -----------------------------------------------------

# Sphinx extension module names.
extensions = [
    'sphinx.ext.doctest',
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'humanfriendly.sphinx',
]

# Configuration for the `autodoc' extension.
autodoc_member_order = 'bysource'

# Paths that contain templates, relative to this directory.
templates_path = ['templates']

# The suffix of source filenames.
source_suffix = '.rst'

# The master toctree document.
master_doc = 'index'

# General information about the project.
project = 'lumifit'
copyright = '2026, the lumifit developers'

# The version info for the project you're documenting, acts as replacement for
# |version| and |release|, also used in various other places throughout the
# built documents.

# Find the package version and make it the release.
from lumifit import __version__ as lumifit_version  # noqa

# The short X.Y version.
version = '.'.join(lumifit_version.split('.')[:2])

# The full version, including alpha/beta/rc tags.
release = lumifit_version

# The language for content autogenerated by Sphinx. Refer to documentation
# for a list of supported languages.
language = 'en'

# List of patterns, relative to source directory, that match files and
# directories to ignore when looking for source files.
exclude_patterns = ['build']

# If true, '()' will be appended to :func: etc. cross-reference text.
add_function_parentheses = True

# The name of the Pygments (syntax highlighting) style to use.
pygments_style = 'sphinx'

# Refer to the Python standard library and the packages we build on.
intersphinx_mapping = dict(
    python3=('https://docs.python.org/3', None),
    coloredlogs=('https://coloredlogs.readthedocs.io/en/latest/', None),
    humanfriendly=('https://humanfriendly.readthedocs.io/en/latest/', None),
    numpy=('https://numpy.org/doc/stable/', None),
    torch=('https://pytorch.org/docs/stable/', None),
)

# -- Options for HTML output ---------------------------------------------------

# The theme to use for HTML and HTML Help pages.  See the documentation for
# a list of builtin themes.
html_theme = 'nature'
