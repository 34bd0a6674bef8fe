"""Shared fixtures for ptwell tests."""

import pytest

from ptwell.model import WellSpec


@pytest.fixture
def pure_well() -> WellSpec:
    """The bare square well on (-1, 1)."""
    return WellSpec()


@pytest.fixture
def half_well() -> WellSpec:
    """One delta pair at +-1/2 with xi = 3."""
    return WellSpec((0.5,), (3.0,))


@pytest.fixture
def double_well() -> WellSpec:
    """Two delta pairs, the inner one weaker."""
    return WellSpec((0.3, 0.7), (1.5, 2.5))


@pytest.fixture
def triple_well() -> WellSpec:
    """Three delta pairs; only the matrix backend handles it."""
    return WellSpec((0.2, 0.5, 0.8), (1.0, 2.0, 1.0))


@pytest.fixture
def spec_file(tmp_path):
    """Write a spec document and return its path."""

    def write(text: str, name: str = "well.txt") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
