"""Pytest configuration and fixtures for unit tests."""

import sys
from pathlib import Path

import pytest

# Add rootfs/usr/bin to Python path
rootfs_path = Path(__file__).parent.parent.parent / "rootfs" / "usr" / "bin"
sys.path.insert(0, str(rootfs_path))

from pairing_model import Pairing  # noqa: E402


@pytest.fixture
def two_loops_pairing():
    """n=2: two loops at each vertex plus one edge between them (no valid orientation)."""
    return Pairing(2, ((0, 1), (2, 3), (4, 5), (6, 7), (8, 9)))


@pytest.fixture
def triple_edge_pairing():
    """n=2: a triple edge 0-1 and one loop at each vertex."""
    return Pairing(2, ((0, 5), (1, 6), (2, 7), (3, 4), (8, 9)))


@pytest.fixture
def quintuple_edge_pairing():
    """n=2: five parallel edges between the two vertices."""
    return Pairing(2, ((0, 5), (1, 6), (2, 7), (3, 8), (4, 9)))
