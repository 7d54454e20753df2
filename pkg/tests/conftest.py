from datetime import datetime, timezone

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

FIXED_NOW = datetime(2021, 7, 1, 12, 0, 0, tzinfo=timezone.utc)


@pytest.fixture
def fixed_clock():
    """Injectable wall clock so stores are byte-identical across runs."""
    return lambda: FIXED_NOW
