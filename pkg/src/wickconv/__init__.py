"""Convergence of Wick power series for indefinite-metric free fields.

Modules: :mod:`weights` (Gelfand-Shilov weight sequences and weight
functions), :mod:`fields` (two-point functions and majorants),
:mod:`wick` (pairing combinatorics), :mod:`convergence` (coefficient,
IR and UV criteria), :mod:`spectral` (light cones and weighted norms),
:mod:`serieslab` (truncated norm series) and :mod:`cli`.
"""

__version__ = "0.1.0"
