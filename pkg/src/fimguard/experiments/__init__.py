"""
Experiments Package - Regularization Sweeps

Scripted studies built on the library API rather than the CLI.
"""

__all__ = ["mu_sweep"]
