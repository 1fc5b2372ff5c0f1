"""Unit tests: one module per fimguard component, synthetic data only."""
