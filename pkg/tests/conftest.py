import numpy as np
import pytest

from fluidsurf import mesh as meshmod, fespace, geomops


@pytest.fixture(scope="session")
def sphere_k3():
    """Moderate unit icosphere, order 3 (shared across tests)."""
    m, g = meshmod.icosphere(1.0, level=2, order=3)
    return m, g


@pytest.fixture(scope="session")
def sphere_k3_gd(sphere_k3):
    _, g = sphere_k3
    return geomops.GeometryData(g)


@pytest.fixture(scope="session")
def sphere_k3_space(sphere_k3):
    _, g = sphere_k3
    return fespace.TaylorHoodSpace(g)


@pytest.fixture(scope="session")
def fine_sphere_gd():
    """High-resolution sphere for tight integral tolerances."""
    _, g = meshmod.icosphere(1.0, level=5, order=3)
    return geomops.GeometryData(g)


@pytest.fixture(scope="session")
def coarse_sphere_k2():
    m, g = meshmod.icosphere(1.0, level=1, order=2)
    return m, g


def sphere_ladder(order, levels=(1, 2, 3), radius=1.0):
    """(h, geometry) pairs over a refinement ladder."""
    out = []
    for lv in levels:
        _, g = meshmod.icosphere(radius, level=lv, order=order)
        out.append((meshmod.mesh_size(g)[0], g))
    return out


def eoc(hs, errs):
    hs = np.asarray(hs, float)
    errs = np.asarray(errs, float)
    return np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])
