"""Integration tests package.

This package contains tests that run whole verification suites and the
command-line workflows end to end.
"""
