"""Loss-likelihood bootstrap and calibrated general-Bayesian posteriors."""

__version__ = "0.1.0"
