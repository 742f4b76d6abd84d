"""Command-line package.

This package contains the Flask blueprint whose CLI commands form the
command surface of Cartan Lab.
"""
