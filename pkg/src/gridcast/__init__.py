"""gridcast: graph-convolution + GRU temperature forecasting on small gridded domains.

Submodules are imported explicitly (``from gridcast import grid, graph, model, ...``)
so the command-line entry point can pin BLAS thread counts before numpy loads.
"""

__version__ = "0.1.0"
