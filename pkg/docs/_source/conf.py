# Sphinx configuration for the cva_hydro documentation.
import os
import sys
import sphinx_rtd_theme

sys.path.insert(0, os.path.abspath('../..'))


def skip(app, what, name, obj, would_skip, options):
    # Document constructors of the parameter dataclasses
    if name == "__init__":
        return False
    return would_skip


def setup(app):
    app.connect("autodoc-skip-member", skip)


project = 'cva_hydro'
copyright = '2024, CVA Hydro Developers'
author = 'CVA Hydro Developers'
release = '0.1'

extensions = [
    'sphinx.ext.napoleon',
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
    'sphinx.ext.mathjax',
    'sphinx.ext.autosummary',
    'sphinx.ext.intersphinx',
]

intersphinx_mapping = {
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
    'python': ('https://docs.python.org/3', None),
}

autosummary_generate = True
autodoc_member_order = 'bysource'

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
source_suffix = {'.rst': 'restructuredtext'}
pygments_style = 'sphinx'

# Docstrings follow the Google layout; math in them is written as :math: roles
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_use_param = False
napoleon_use_rtype = False

html_theme = 'sphinx_rtd_theme'
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_theme_options = {
    'collapse_navigation': False,
    'sticky_navigation': True,
    'navigation_depth': 3,
}
htmlhelp_basename = project + 'doc'
html_static_path = []
