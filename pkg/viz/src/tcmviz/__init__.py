"""Figures from tcm output files (snapshots, diagnostics CSV, manifests).

This package reads only the documented on-disk formats; it never imports
the solver.
"""

from tcmviz.readers import read_diagnostics_csv, read_manifest, read_snapshot
from tcmviz.plots import plot_convergence, plot_diagnostics, plot_fields

__all__ = [
    "read_snapshot",
    "read_diagnostics_csv",
    "read_manifest",
    "plot_fields",
    "plot_diagnostics",
    "plot_convergence",
]
