"""Shared fixtures: desk-scale model pairs used across the suite."""
import numpy as np
import pytest

import ffcms as f


@pytest.fixture(scope="session")
def unit_material():
    return f.MaterialSpec(youngs_modulus=1.0, density=1.0, poisson_ratio=0.3)


@pytest.fixture(scope="session")
def steel():
    return f.MaterialSpec.steel()


@pytest.fixture(scope="session")
def chain_pair(unit_material):
    """10+10 element unit chains: k = m = 1."""
    return f.build_chain_pair(10, 10, unit_material)


@pytest.fixture(scope="session")
def chain_system(chain_pair):
    return f.assemble(*chain_pair)


@pytest.fixture(scope="session")
def chain_band():
    """Covers the whole unit-chain spectrum (max f = 2/(2 pi) < 0.32 Hz)."""
    return f.BandSpec(0.0, 1.0)


@pytest.fixture(scope="session")
def small_box_pair(steel):
    """Single-element boxes: 24 DoF each, 12 junction DoF."""
    return f.build_box_pair((1, 1, 1), (1, 1, 1), steel, element_size=0.02)


@pytest.fixture(scope="session")
def box_pair(steel):
    """The workhorse pair: 540 global DoF, 36 junction DoF."""
    return f.build_box_pair((6, 3, 2), (8, 3, 2), steel, element_size=0.02)


@pytest.fixture(scope="session")
def box_system(box_pair):
    return f.assemble(*box_pair)


@pytest.fixture(scope="session")
def box_band(box_system):
    """Band covering the first 25 elastic modes of the assembled boxes."""
    probe = f.solve_modes(
        box_system.mass, box_system.stiffness, f.BandSpec(0.0, 1e9)
    )
    elastic = probe.frequencies[probe.rigid_count :]
    return f.BandSpec(0.0, float(elastic[24]) * 1.05)
