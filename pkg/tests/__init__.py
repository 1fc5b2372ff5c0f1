"""
Tests Package
=============

Test suite for fimguard.
"""
