"""Figure generation for slipflow CSV outputs."""

from .figures import fit_loglog_slope, plot_series, plot_sweep
from .io import SchemaError, collect_series, load_series, load_sweep

__version__ = "0.1.0"
