"""Long-range open spin chains.

Tools for building power-law interacting Lindblad models on qubit chains,
evolving observables and states, analyzing Liouvillian spectra, measuring
information light cones and steady-state correlation clustering, and comparing
every measurement against its analytic envelope.
"""

__version__ = "0.1.0"

from .errors import LrspinError  # noqa: F401
