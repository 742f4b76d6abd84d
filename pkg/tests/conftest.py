import pytest
from cartan_lab import create_app
from config import Config


class TestConfig(Config):
    TESTING = True
    CARTAN_LAB_JET_ORDER = 6
    CARTAN_LAB_MAX_REJECTIONS = 10000
    CARTAN_LAB_POINTS = 5
    CARTAN_LAB_SEED = 42
    CARTAN_LAB_THREADS = 1
    CARTAN_LAB_TOL_SCALE = 1.0
    CARTAN_LAB_TUBE_MARGIN = 0.1
    LOG_LEVEL = 'WARNING'


@pytest.fixture
def app(tmp_path):
    TestConfig.CARTAN_LAB_REPORT_PATH = str(tmp_path / 'report.json')

    app = create_app(TestConfig)

    yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()
