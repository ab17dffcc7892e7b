from __future__ import annotations

import numpy as np
import pytest

from helpers import fit_sdf
from morphield.shapes import sphere_sdf, torus_sdf, two_spheres_sdf

SPHERE_RADIUS = 0.3
CENTER = np.array([0.5, 0.5, 0.5])


@pytest.fixture(scope="session")
def sphere_field():
    """Interpolant of the analytic sphere SDF (r=0.3 centered), n=32."""
    return fit_sdf(lambda p: sphere_sdf(p, CENTER, SPHERE_RADIUS), 32)


@pytest.fixture(scope="session")
def two_spheres_field():
    """Interpolant of the two-sphere scene SDF (r=0.12, centers 0.3 apart), n=64."""
    return fit_sdf(two_spheres_sdf, 64)


@pytest.fixture(scope="session")
def torus_field():
    """Interpolant of the torus scene SDF (R=0.25, r=0.08, axis z), n=64."""
    return fit_sdf(torus_sdf, 64)


@pytest.fixture(scope="session")
def two_spheres_saddle(two_spheres_field):
    from morphield.critical import find_saddles

    saddles = find_saddles(two_spheres_field)
    assert saddles, "two-sphere scene must expose a saddle"
    return saddles[0]


@pytest.fixture(scope="session")
def sphere_session(tmp_path_factory):
    """Full mesh pipeline session on the sphere scene at n=32 (shared, read-mostly).

    Tests that mutate it must restore its state (undo) or work on a copy via
    save/load round-trip.
    """
    from morphield.session import create_session_from_mesh
    from morphield.shapes import make_scene

    mesh = make_scene("sphere")
    return create_session_from_mesh(mesh, "sphere", n=32, normalize=False)
