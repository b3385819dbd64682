"""Numerical toolkit for flux-line scattering path integrals.

Modules
-------
specfun
    Modified Bessel functions of complex argument and real order,
    with self-reported error estimates.
propagator
    Single-solenoid propagators (total, per winding sector, free,
    semi-classical) and the difference scan between them.
homotopy
    Winding-number bookkeeping for solenoid arrays: class enumeration,
    flux phases, shortest representative paths.
oracle
    Discretized covering-space propagation (an independent check on
    the analytic sector amplitudes) and a monitored-path sampler.
forward
    Synthetic interference experiment: intensities at the detector for
    programmed flux settings.
inversion
    Recovery of per-class amplitudes from intensity data.
fractal
    Power-law fits of path length against resolution.
cli
    Batch command-line interface over scenario files.
"""
from abpaths._backend import BACKEND

__all__ = ["BACKEND", "__version__"]
__version__ = "0.1.0"
