"""First-order primal-dual augmented Lagrangian solvers for convex cone programs."""

__version__ = "0.1.0"
