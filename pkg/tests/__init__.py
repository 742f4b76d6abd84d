"""Test suite package.

This package contains all test modules for Cartan Lab, including unit
tests and integration tests.
"""
