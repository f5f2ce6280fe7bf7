"""Spectral analysis and numerics for self-similar wave maps.

Modules: ``slcore`` (Sturm-Liouville model), ``frobenius`` (series at
singular points), ``classify`` (Weyl classification), ``odeint`` (adaptive
Runge-Kutta), ``wavemaps`` (profiles f_n), ``spectrum`` (eigenvalues of A_n),
``ainf`` (the limit-circle operator A_inf), ``oracle`` (matrix cross-check),
``evolve`` (finite differences) and ``cli``.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("wmspectra")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
