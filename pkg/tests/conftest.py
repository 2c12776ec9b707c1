import pytest

from heralded_fock.detector import DetectorConfig
from heralded_fock.source import SourceConfig


@pytest.fixture
def anchor_det():
    """m=5 (M=32), eta=0.66: the detector used throughout the figure-level
    results."""
    return DetectorConfig(5, 0.66)


@pytest.fixture
def anchor_src():
    return SourceConfig(1.0, 1)
