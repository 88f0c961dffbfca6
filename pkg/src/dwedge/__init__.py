"""Numerics for deformed Wigner matrices.

Free-convolution calculus (deformed semicircle law), edge-scaling constants,
Ornstein-Uhlenbeck matrix flow, and a Monte Carlo harness for extreme
eigenvalue statistics (Tracy-Widom, Gaussian, and convolution regimes).
"""

__version__ = "0.1.0"
