"""Figure rendering for the gvf command line tool's output files.

The package consumes the documented CSV/JSON schemas only; it never
imports the core library.
"""

from .io import SchemaError
from .render import KINDS, PlotJob, render

__version__ = "0.1.0"

__all__ = ["KINDS", "PlotJob", "SchemaError", "render", "__version__"]
