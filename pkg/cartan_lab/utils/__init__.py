"""Utility package.

This package contains the truncated Taylor jet arithmetic and the error
types shared by all services.
"""
