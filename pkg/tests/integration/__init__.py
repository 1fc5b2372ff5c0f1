"""
Integration Tests
=================

End-to-end CLI runs on synthetic blobs, plus the MNIST acceptance runs
(marked slow, skipped without the IDX files).
"""
