"""Closed forms, Monte Carlo and estimators for a pulsed heralded single-photon source."""

__version__ = "0.1.0"
