import numpy as np
import pytest

from thermalbell.sources import tls
from thermalbell.speckle import Geometry, generate_frames

# Desk-scale geometry: fringe period 99.75 px, scan spans 1.27 periods,
# slit-envelope droop across the window < 1%.
DESK_GEOMETRY = dict(pixel_pitch=8e-6, width=128, height=8)


@pytest.fixture(scope="session")
def desk_geom() -> Geometry:
    return Geometry(**DESK_GEOMETRY)


@pytest.fixture(scope="session")
def frames_20k(desk_geom):
    """Frozen-speckle stack shared by estimator tests (tau ~ 0)."""
    return generate_frames(desk_geom, tls(1.0, 1.0), 20000, tau_ratio=0.001,
                           substeps=2, n_subsources=64, seed=42)


@pytest.fixture(scope="session")
def frames_tiny(desk_geom):
    return generate_frames(desk_geom, tls(1.0, 1.0), 600, tau_ratio=0.01,
                           substeps=2, n_subsources=16, seed=7)


@pytest.fixture()
def rng():
    return np.random.default_rng(123)
