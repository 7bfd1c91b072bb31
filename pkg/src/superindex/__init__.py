"""Finite-rank superconnection index toolkit.

Implements, at desk scale, the computational content of one-dimensional
supersymmetric Euclidean field theories valued in Clifford modules: truncated
jet-form coefficient rings, Clifford algebras with supertraces and index
classes, Clifford-linear superconnections and their heat semigroups, Chern
and eta forms, and spectral-cutoff index bundles assembled into differential
cocycles.
"""

__version__ = "0.1.0"

from .superring import QQi, RingElement, RingSignature

__all__ = ["QQi", "RingElement", "RingSignature", "__version__"]
