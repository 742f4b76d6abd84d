"""Configuration module for Cartan Lab.

This module defines the application configuration class that loads run
defaults from environment variables (and an optional .env file).
"""

import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Application configuration class.

    Loads configuration from environment variables or provides defaults.
    Command options override the run-related values per invocation.

    Attributes:
        CARTAN_LAB_DUMP_DIGITS: Significant digits of dumped tensor values
        CARTAN_LAB_JET_ORDER: Largest jet order a run may use (1..6)
        CARTAN_LAB_MAX_REJECTIONS: Consecutive sampling rejections before giving up
        CARTAN_LAB_POINTS: Default number of sample points
        CARTAN_LAB_REPORT_PATH: Default path of the JSON report
        CARTAN_LAB_SEED: Default sampling seed
        CARTAN_LAB_THREADS: Default number of worker threads
        CARTAN_LAB_TOL_SCALE: Multiplier applied to every tolerance
        CARTAN_LAB_TUBE_MARGIN: Relative margin kept inside the tube when c > 0
        LOG_LEVEL: Level of the application logger
        TESTING: Enable testing mode
    """
    CARTAN_LAB_DUMP_DIGITS = int(os.environ.get('CARTAN_LAB_DUMP_DIGITS', 15))
    CARTAN_LAB_JET_ORDER = int(os.environ.get('CARTAN_LAB_JET_ORDER', 6))
    CARTAN_LAB_MAX_REJECTIONS = int(os.environ.get('CARTAN_LAB_MAX_REJECTIONS', 10000))
    CARTAN_LAB_POINTS = int(os.environ.get('CARTAN_LAB_POINTS', 100))
    CARTAN_LAB_REPORT_PATH = os.environ.get('CARTAN_LAB_REPORT_PATH', 'cartan-lab-report.json')
    CARTAN_LAB_SEED = int(os.environ.get('CARTAN_LAB_SEED', 42))
    CARTAN_LAB_THREADS = int(os.environ.get('CARTAN_LAB_THREADS', 1))
    CARTAN_LAB_TOL_SCALE = float(os.environ.get('CARTAN_LAB_TOL_SCALE', 1.0))
    CARTAN_LAB_TUBE_MARGIN = float(os.environ.get('CARTAN_LAB_TUBE_MARGIN', 0.1))
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    TESTING = False
