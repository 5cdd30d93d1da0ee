import os
import sys

import pytest

# Ensure project root is on sys.path so tests can import the 'awgnbandit' package
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from awgnbandit.core import gap_instance  # noqa: E402
from awgnbandit.link import ChannelParams  # noqa: E402


@pytest.fixture
def unit_channel():
    """P = 1, sigma^2 = 1 (SNR 1)."""
    return ChannelParams(power=1.0, noise_variance=1.0)


@pytest.fixture
def noiseless_channel():
    return ChannelParams(power=1.0, noise_variance=0.0)


@pytest.fixture
def two_arm_gap():
    return gap_instance(2, 0.2)


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "results"
    return path
