import datetime
import inspect
import sys
from pathlib import Path

import toml

_REPO_ROOT = Path(__file__).resolve().parent.parent
with (_REPO_ROOT / "pyproject.toml").open() as f:
    _pyproject = toml.load(f)

project = "acon"
copyright = f"{datetime.date.today().year}, Slavfox"
author = "Slavfox"
version = release = _pyproject["tool"]["poetry"]["version"]
repo = "https://github.com/slavfox/acon"
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.linkcode",
    "sphinx.ext.mathjax",
]
templates_path = ["_templates"]
exclude_patterns = ["_build"]
html_theme = "alabaster"
html_theme_options = {
    "fixed_sidebar": True,
    "extra_nav_links": {"GitHub repo": repo},
    "show_relbars": True,
    "description": "Volume-constrained ternary phase-field dynamics",
}
default_role = "any"
intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
}
autodoc_typehints = "description"
autodoc_member_order = "bysource"
# The package annotates with string literals; let autodoc show them as-is.
autodoc_type_aliases = {
    "FloatArray": "acon.typedefs.FloatArray",
    "ComplexArray": "acon.typedefs.ComplexArray",
    "Real": "acon.typedefs.Real",
    "Pair": "acon.typedefs.Pair",
}
mathjax3_config = {
    "tex": {
        "macros": {
            "T": r"\mathbb{T}",
            "eps": r"\varepsilon",
        }
    }
}


def _source_span(obj):
    try:
        lines, first = inspect.getsourcelines(obj)
    except (OSError, TypeError):
        return ""
    return f"#L{first}-L{first + len(lines) - 1}" if first else ""


# Adapted from numpy's doc/source/conf.py.
def linkcode_resolve(domain, info):
    if domain != "py" or info["module"] not in sys.modules:
        return None
    obj = sys.modules[info["module"]]
    for name in info["fullname"].split("."):
        obj = getattr(obj, name, None)
        if obj is None:
            return None
    try:
        source = Path(inspect.getsourcefile(obj))
    except TypeError:
        return None
    try:
        path = source.relative_to(_REPO_ROOT).as_posix()
    except ValueError:
        return None
    return f"{repo}/tree/master/{path}{_source_span(obj)}"
