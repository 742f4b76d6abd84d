"""Unit tests package.

This package contains unit tests for the jet arithmetic and the
individual services of Cartan Lab.
"""
