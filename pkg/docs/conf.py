# Sphinx configuration for the nsac documentation.
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

from nsac import __version__  # noqa: E402

# -- Project information -----------------------------------------------------

project = "nsac"
copyright = "2026, nsac developers"
author = "nsac developers"
release = __version__
version = ".".join(__version__.split(".", 2)[:2])

# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "karma_sphinx_theme",
]
language = "en"
exclude_patterns = ["_build"]

autodoc_member_order = "bysource"
autodoc_typehints = "description"
autodoc_default_options = {"members": True, "show-inheritance": True}

# -- HTML output -------------------------------------------------------------

html_theme = "karma_sphinx_theme"
html_title = f"nsac {release}"

intersphinx_mapping = {
    "py": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
}
