"""Evolution operators of non-autonomous linear ODEs, explicit
uniform-stability certificates for separable coefficients, and certified
bounds for parallel transports on trivial planar bundles."""

__version__ = "0.1.0"
