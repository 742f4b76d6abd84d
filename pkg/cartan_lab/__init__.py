"""Flask application factory module.

This module provides the application factory that configures logging and
registers the command blueprint of Cartan Lab.
"""

from flask import Flask
from config import Config

__version__ = '1.0.0'


def create_app(config_class=Config):
    """Create and configure the Flask application.

    Args:
        config_class: Configuration class to use (default: Config from config.py)

    Returns:
        Flask: Configured application whose CLI carries the verify, dump and
        sample commands

    Example:
        >>> app = create_app()
        >>> app.test_cli_runner().invoke(args=['verify', '--preset', 'euclidean'])
    """
    app = Flask(__name__)
    app.config.from_object(config_class)
    app.logger.setLevel(app.config['LOG_LEVEL'])

    from cartan_lab.commands import main
    app.register_blueprint(main.bp)

    return app
