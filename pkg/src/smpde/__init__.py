"""Staggered-mesh auxiliary-variable time integrators for dissipative PDEs.

The package provides a Fourier pseudo-spectral layer for periodic 2D domains
(:mod:`smpde.spectral`), five concrete dissipative models
(:mod:`smpde.models`), the staggered-mesh time-stepping schemes with
baselines (:mod:`smpde.integrators`), an experiment harness
(:mod:`smpde.harness`), and a command-line interface (:mod:`smpde.cli`).
"""

__version__ = "0.1.0"
