"""Separating point singularities from curvilinear singularities in images.

Two Parseval frames on the discrete torus, radial wavelets for points and
curvelets for curves, split each dyadic subband by minimising the l1 norm of
the analysis coefficients. The package also measures the coherence
quantities that govern when such a split is accurate, and certifies the
solver against an exact brute-force oracle on tiny instances.
"""

__version__ = "0.1.0"
