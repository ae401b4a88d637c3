"""Levy flight cluster model: collapsed MCMC fitting, simulation and activity analysis."""

__version__ = "0.1.0"
