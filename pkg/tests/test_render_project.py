import numpy as np
import pytest

from ico3d.core import CameraModel, GaussianSet, default_camera
from ico3d.render import LOW_PASS, RADIUS_FACTOR, project


def identity_camera(width=64, height=64, f=500.0):
    return CameraModel(fx=f, fy=f, cx=(width - 1) / 2, cy=(height - 1) / 2,
                       width=width, height=height, world_to_camera=np.eye(4))


def single_splat(mean, scale=0.1, opacity=0.7, rgb=(0.5, 0.5, 0.5)):
    return GaussianSet.from_activated(
        means=np.array([mean], dtype=np.float64),
        rotations=np.array([[1.0, 0.0, 0.0, 0.0]]),
        scales=np.full((1, 3), scale),
        opacities=np.array([opacity]),
        sh_coeffs=((np.asarray(rgb, dtype=np.float64) - 0.5)
                   / 0.28209479177387814).reshape(1, 1, 3),
    )


class TestOnAxisProjection:
    """Isotropic sigma=0.1 at z=2 on the optical axis, fx=fy=500: the
    perspective Jacobian is diag(250, 250), so the screen covariance is
    (500*0.1/2)^2 + low-pass on both diagonal entries."""

    def test_screen_mean_is_principal_point(self):
        cam = identity_camera()
        proj = project(single_splat((0.0, 0.0, 2.0)), cam)
        assert proj.count == 1
        np.testing.assert_allclose(proj.mean2d[0], [cam.cx, cam.cy], atol=1e-12)

    def test_screen_covariance_closed_form(self):
        cam = identity_camera()
        proj = project(single_splat((0.0, 0.0, 2.0)), cam)
        expected = (500.0 * 0.1 / 2.0) ** 2 + LOW_PASS
        a, b, c = proj.cov2d[0]
        assert abs(a - expected) < 1e-9
        assert abs(c - expected) < 1e-9
        assert abs(b) < 1e-12

    def test_conic_is_inverse_covariance(self):
        cam = identity_camera()
        proj = project(single_splat((0.1, -0.2, 2.5), scale=0.05), cam)
        a, b, c = proj.cov2d[0]
        ca, cb, cc = proj.conic[0]
        prod = np.array([[a, b], [b, c]]) @ np.array([[ca, cb], [cb, cc]])
        np.testing.assert_allclose(prod, np.eye(2), atol=1e-12)

    def test_depth_is_view_space_z(self):
        proj = project(single_splat((0.0, 0.0, 2.0)), identity_camera())
        assert abs(proj.depth[0] - 2.0) < 1e-12

    def test_radius_bound(self):
        proj = project(single_splat((0.0, 0.0, 2.0)), identity_camera(512, 512))
        lam = (500.0 * 0.1 / 2.0) ** 2 + LOW_PASS
        assert proj.radius[0] == int(np.ceil(RADIUS_FACTOR * np.sqrt(lam))) + 1


class TestCulling:
    def test_behind_camera_culled(self):
        proj = project(single_splat((0.0, 0.0, -1.0)), identity_camera())
        assert proj.count == 0
        assert proj.culled == 1

    def test_far_offscreen_culled(self):
        # Projects 500*100/2 = 25000 px off a 64 px viewport.
        proj = project(single_splat((100.0, 0.0, 2.0), scale=0.01), identity_camera())
        assert proj.count == 0
        assert proj.culled == 1

    def test_splat_overlapping_border_kept(self):
        # Mean slightly outside but footprint reaches the viewport.
        cam = identity_camera()
        proj = project(single_splat((0.27, 0.0, 2.0), scale=0.05), cam)
        assert proj.mean2d.shape[0] in (0, 1)
        # mean2d x = 500*0.27/2 + 31.5 = 99. radius ~ 3.33*sqrt(156.55)+1 ~ 43
        # covers x >= 56 < 63 so it must be kept.
        assert proj.count == 1

    def test_empty_set(self):
        proj = project(GaussianSet.empty(), identity_camera())
        assert proj.count == 0
        assert proj.culled == 0


class TestDepthOrdering:
    def test_sorted_ascending_depth(self):
        rng = np.random.default_rng(5)
        from ico3d.core import random_set
        gs = random_set(rng, 100, center=(0, 0, 4), spread=0.8)
        proj = project(gs, default_camera(96, 96, eye=(0, 0, 0), target=(0, 0, 1)))
        assert np.all(np.diff(proj.depth) >= 0)

    def test_tie_broken_by_input_index(self):
        gs = GaussianSet.from_activated(
            means=np.array([[0.05, 0.0, 2.0], [-0.05, 0.0, 2.0]]),
            rotations=np.tile([1.0, 0, 0, 0], (2, 1)),
            scales=np.full((2, 3), 0.05),
            opacities=np.array([0.5, 0.5]),
            sh_coeffs=np.zeros((2, 1, 3)),
        )
        proj = project(gs, identity_camera())
        assert proj.depth[0] == proj.depth[1]
        np.testing.assert_array_equal(proj.index, [0, 1])


class TestOverrides:
    def test_color_override_bypasses_sh(self):
        cam = identity_camera()
        gs = single_splat((0.0, 0.0, 2.0), rgb=(0.9, 0.9, 0.9))
        override = np.array([[0.1, 0.2, 0.3]])
        proj = project(gs, cam, color_override=override)
        np.testing.assert_array_equal(proj.rgb, override)

    def test_opacity_override(self):
        cam = identity_camera()
        gs = single_splat((0.0, 0.0, 2.0), opacity=0.7)
        proj = project(gs, cam, opacity_override=np.array([0.25]))
        np.testing.assert_array_equal(proj.opacity, [0.25])

    def test_sh_degree_limit(self):
        rng = np.random.default_rng(9)
        from ico3d.core import random_set
        gs = random_set(rng, 20, sh_degree=3, center=(0, 0, 3))
        cam = identity_camera(128, 128)
        p0 = project(gs, cam, sh_degree=0)
        gs0 = gs.with_sh_degree(3)
        from ico3d.core.sh import eval_sh
        dirs = gs.means - cam.center
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        expected = eval_sh(gs.sh_coeffs[:, :1, :], dirs, 0)
        np.testing.assert_allclose(p0.rgb, expected[p0.index], atol=1e-14)


class TestAuxState:
    def test_aux_arrays_present_and_consistent(self):
        cam = default_camera(64, 64)
        from ico3d.core import random_set
        gs = random_set(np.random.default_rng(2), 30)
        proj = project(gs, cam, aux=True)
        assert proj.t_cam is not None and proj.vmat is not None and proj.jac is not None
        # vmat must be the world covariance rotated into camera frame.
        from ico3d.core.quaternion import build_covariances
        cov = build_covariances(gs.rotations[proj.index], gs.scales[proj.index])
        rot = cam.rotation
        np.testing.assert_allclose(
            proj.vmat, np.einsum("ij,njk,lk->nil", rot, cov, rot), atol=1e-12)
        # Reconstruct packed cov2d from J V J^T + low-pass.
        full = np.einsum("nij,njk,nlk->nil", proj.jac, proj.vmat, proj.jac)
        np.testing.assert_allclose(proj.cov2d[:, 0], full[:, 0, 0] + LOW_PASS, atol=1e-10)
        np.testing.assert_allclose(proj.cov2d[:, 1], full[:, 0, 1], atol=1e-10)
        np.testing.assert_allclose(proj.cov2d[:, 2], full[:, 1, 1] + LOW_PASS, atol=1e-10)
