#!/usr/bin/env python3
"""Command-line entry point for Cartan Lab.

Usage:
    python run.py verify --preset hyperbolic-half-plane --suites all
    python run.py dump --preset euclidean --dump-at "0,0;1,0"
    python run.py sample --preset sphere-patch --points 5
"""

from flask.cli import FlaskGroup

from cartan_lab import create_app

cli = FlaskGroup(create_app=create_app, add_default_commands=False, help='Cartan Lab verification engine.')

if __name__ == '__main__':
    cli()
