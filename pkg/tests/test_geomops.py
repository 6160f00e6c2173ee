import numpy as np
import pytest

from fluidsurf import fespace, geomops, mesh as meshmod
from conftest import sphere_ladder, eoc


# ---------------------------------------------------------------------------
# frame invariants
# ---------------------------------------------------------------------------

def frames_for(geometry):
    return geomops.GeometryData(geometry)


@pytest.mark.parametrize("maker", [
    lambda: meshmod.icosphere(1.0, level=2, order=2)[1],
    lambda: meshmod.icosphere(0.5, level=2, order=3)[1],
    lambda: meshmod.torus(2.0, 0.5, 16, 8, order=3)[1],
    lambda: meshmod.perturbed_sphere(0.4, level=2, order=3)[1],
])
def test_frame_invariants(maker):
    gd = frames_for(maker())
    nu, P, B = gd.normal, gd.projection, gd.shape_operator
    assert np.max(np.abs(np.linalg.norm(nu, axis=-1) - 1)) < 1e-12
    assert np.max(np.abs(P @ P - P)) < 1e-10
    assert np.max(np.abs(np.einsum("mqij,mqj->mqi", P, nu))) < 1e-10
    assert np.max(np.abs(np.einsum("mqij,mqj->mqi", B, nu))) < 1e-10
    assert np.max(np.abs(B - np.swapaxes(B, -1, -2))) < 1e-10
    assert np.all(gd.weight > 0)


def test_sphere_closed_forms():
    _, g = meshmod.icosphere(1.0, level=3, order=3)
    gd = frames_for(g)
    x = gd.position
    # outward normal = position on the unit sphere
    assert np.max(np.linalg.norm(gd.normal - x / np.linalg.norm(
        x, axis=-1, keepdims=True), axis=-1)) < 1e-3
    # curvature from the discrete normal converges quadratically
    assert np.max(np.abs(gd.mean_curvature + 2.0)) < 5e-2
    assert np.max(np.abs(gd.shape_operator + gd.projection)) < 5e-2
    # umbilic surface: beta vanishes in the continuum
    assert np.max(np.abs(gd.beta)) < 5e-2


@pytest.mark.parametrize("radius", [0.5, 1.0, 2.0])
def test_sphere_curvature_scaling(radius):
    _, g = meshmod.icosphere(radius, level=2, order=3)
    gd = frames_for(g)
    assert np.max(np.abs(gd.mean_curvature + 2.0 / radius)) < 0.2 / radius


@pytest.mark.parametrize("order", [2, 3])
def test_normal_and_curvature_eoc(order):
    hs, e_nu, e_H = [], [], []
    for h, g in sphere_ladder(order, levels=(1, 2, 3)):
        gd = frames_for(g)
        x = gd.position
        xs = x / np.linalg.norm(x, axis=-1, keepdims=True)
        e_nu.append(np.max(np.linalg.norm(gd.normal - xs, axis=-1)))
        e_H.append(np.max(np.abs(gd.mean_curvature + 2.0)))
        hs.append(h)
    assert eoc(hs, e_nu).min() >= order - 0.3
    # curvature from the discrete normal converges at least quadratically
    assert eoc(hs, e_H).min() >= 1.7


def test_torus_principal_curvatures():
    R, r = 2.0, 0.5
    _, g = meshmod.torus(R, r, 32, 16, order=3)
    gd = frames_for(g)
    x = gd.position
    rho = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)
    cosv = (rho - R) / r
    k1 = -cosv / (R + r * cosv)   # around the tube axis
    k2 = np.full_like(k1, -1.0 / r)
    # restrict B to an orthonormal tangent basis to drop the zero
    # eigenvalue in the normal direction
    t1 = gd.jacobian[..., 0]
    t1 = t1 / np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(gd.normal, t1)
    T = np.stack([t1, t2], axis=-1)                      # (m, q, 3, 2)
    Bt = np.einsum("mqia,mqij,mqjb->mqab", T, gd.shape_operator, T)
    got = np.sort(np.linalg.eigvalsh(Bt), axis=-1)
    expect = np.sort(np.stack([k1, k2], axis=-1), axis=-1)
    assert np.max(np.abs(got - expect)) < 5e-2
    assert np.max(np.abs(gd.mean_curvature - (k1 + k2))) < 5e-2


# ---------------------------------------------------------------------------
# differential operators
# ---------------------------------------------------------------------------

def test_surface_gradient_constant_and_tangency(sphere_k3, sphere_k3_gd):
    _, g = sphere_k3
    gd = sphere_k3_gd
    sp = fespace.FESpace(g, 3)
    c = sp.interpolate(lambda x: np.full(len(x), 3.25))
    grad = geomops.scalar_gradient(gd, sp, c)
    assert np.max(np.abs(grad)) < 1e-10
    f = sp.interpolate(lambda x: x[:, 2] ** 2 - x[:, 0])
    grad = geomops.scalar_gradient(gd, sp, f)
    # tangency is exact by construction
    assert np.max(np.abs(np.einsum("mqi,mqi->mq", grad, gd.normal))) < 1e-12


def test_surface_gradient_height_function(sphere_k3, sphere_k3_gd):
    _, g = sphere_k3
    gd = sphere_k3_gd
    sp = fespace.FESpace(g, 3)
    f = sp.interpolate(lambda x: x[:, 2])
    grad = geomops.scalar_gradient(gd, sp, f)
    x = gd.position
    ez = np.zeros_like(x)
    ez[..., 2] = 1.0
    exact = ez - x[..., 2:3] * x
    assert np.max(np.linalg.norm(grad - exact, axis=-1)) < 5e-3


def test_divergence_of_position_is_two(sphere_k3, sphere_k3_gd):
    _, g = sphere_k3
    sp = fespace.FESpace(g, 3, components=3)
    w = sp.interpolate(lambda x: x)
    div = geomops.divergence(sphere_k3_gd, sp, w)
    assert np.max(np.abs(div - 2.0)) < 5e-3


def test_rigid_rotation_is_killing(sphere_k3, sphere_k3_gd):
    _, g = sphere_k3
    gd = sphere_k3_gd
    sp = fespace.FESpace(g, 3, components=3)
    w = sp.interpolate(lambda x: np.stack(
        [-x[:, 1], x[:, 0], np.zeros(len(x))], axis=1))
    div = geomops.divergence(gd, sp, w)
    sig = geomops.rate_of_deformation(gd, sp, w)
    assert geomops.l2_norm(gd, div) < 1e-10
    assert np.sqrt(geomops.integrate(
        gd, np.einsum("mqij,mqij->mq", sig, sig))) < 1e-3


def test_constant_field_divergence_identity(sphere_k3, sphere_k3_gd):
    _, g = sphere_k3
    gd = sphere_k3_gd
    sp = fespace.FESpace(g, 3, components=3)
    c = np.array([0.4, -1.1, 0.6])
    w = sp.interpolate(lambda x: np.broadcast_to(c, x.shape))
    # a constant field has exactly zero tangential divergence
    assert geomops.l2_norm(gd, geomops.divergence(gd, sp, w)) < 1e-12
    # its tangential projection picks up the curvature:
    # div_S(P c) = (c . nu) H on the unit sphere (nu = x)
    wp = sp.interpolate(lambda x: c[None, :] - (x @ c)[:, None] * x)
    div = geomops.divergence(gd, sp, wp)
    expect = np.einsum("i,mqi->mq", c, gd.normal) * gd.mean_curvature
    assert geomops.l2_norm(gd, div - expect) < 0.2


def test_divergence_identity_random_fields():
    rng = np.random.default_rng(7)
    hs, errs = [], []
    for h, g in sphere_ladder(3, levels=(1, 2, 3)):
        gd = frames_for(g)
        sp = fespace.FESpace(g, 3, components=3)
        worst = 0.0
        for _ in range(10):
            A = rng.normal(size=(3, 3))
            b = rng.normal(size=3)
            w = sp.interpolate(lambda x: x @ A.T + b)
            div = geomops.divergence(gd, sp, w)
            # closed surface: int div_P w + int (w.nu) H = 0
            wq = geomops.vector_at(gd, sp, w)
            wn = np.einsum("mqi,mqi->mq", wq, gd.normal)
            resid = abs(geomops.integrate(gd, div)
                        + geomops.integrate(gd, wn * gd.mean_curvature))
            worst = max(worst, resid)
        hs.append(h)
        errs.append(worst)
    assert errs[1] < errs[0] and errs[2] < errs[1]
    assert eoc(hs, errs).min() >= 1.5


def test_integrate_closed_surface_identities(fine_sphere_gd):
    gd = fine_sphere_gd
    assert abs(gd.area() - 4 * np.pi) < 1e-6
    assert abs(gd.volume() - 4 * np.pi / 3) < 1e-6
    flux = geomops.integrate(gd, gd.normal)
    assert np.max(np.abs(flux)) < 1e-8


def test_scalar_laplacian_eigenfunction(sphere_k3, sphere_k3_gd):
    # spherical harmonics: Laplace-Beltrami of x2 on the unit sphere is -2 x2
    _, g = sphere_k3
    gd = sphere_k3_gd
    sp = fespace.FESpace(g, 3)
    f = sp.interpolate(lambda x: x[:, 2])
    lap = geomops.scalar_laplacian(gd, sp, f)
    exact = -2.0 * gd.position[..., 2]
    assert geomops.l2_norm(gd, lap - exact) < 0.2


def test_frame_at_matches_bulk(sphere_k3):
    _, g = sphere_k3
    gd = geomops.GeometryData(g)
    q = 2
    fr = geomops.frame_at(g, 5, gd.rule.points[q])
    assert np.allclose(fr.position, gd.position[5, q], atol=1e-12)
    assert np.allclose(fr.normal, gd.normal[5, q], atol=1e-12)
    assert np.allclose(fr.shape_operator, gd.shape_operator[5, q], atol=1e-10)
