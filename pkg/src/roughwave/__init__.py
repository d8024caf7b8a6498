"""Transmission scattering of acoustic waves by a rough interface between two half-planes.

Nystrom discretization of the boundary integral system built on half-plane
impedance Green's functions, plus the verification suites and the
near-interface singularity probes that go with it.
"""

__version__ = "0.1.0"
