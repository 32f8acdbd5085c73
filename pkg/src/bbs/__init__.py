"""Box-ball system laboratory: exact dynamics, spectral speed equations,
thermodynamics of generalized Gibbs ensembles, hydrodynamic domain-wall
profiles and Monte Carlo sampling."""

__version__ = "1.0.0"
