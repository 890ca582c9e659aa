"""Numerical laboratory for Zakharov-system collapse.

Modules: ``grid`` (radial and periodic discretisations), ``profiles``
(self-similar and ground-state profiles), ``evolve`` (split-step solver and
run driver), ``diagnostics`` (conserved quantities, variance identities,
rate fits), ``cli``.
"""
__version__ = "0.1.0"
