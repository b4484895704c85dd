"""HTTP service wrapping the core package.

Heavy tensor data (posterior/discriminator maps) moves by file path:
requests carry manifest locations and parameters, responses carry output
paths and JSON reports.  Small array-level operations are exposed
directly for interactive use.
"""

from .app import create_app

__all__ = ["create_app"]
