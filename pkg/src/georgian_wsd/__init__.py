"""Georgian homonym sense disambiguation toolkit.

Corpus filtering and window extraction, skip-gram word embeddings, a
two-layer LSTM sense classifier and an evaluation harness, wired together
by the `wsd` command-line tool.
"""

__version__ = "0.1.0"

from .backend import backend_name

__all__ = ["backend_name", "__version__"]
