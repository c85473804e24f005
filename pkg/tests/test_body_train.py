import numpy as np
import pytest

from ico3d.body import (
    BodyFitConfig,
    consistency_loss,
    deform,
    finetune_window,
    new_window_model,
)
from ico3d.core import CameraModel, GaussianSet, default_camera, look_at, random_set
from ico3d.core.sh import rgb_to_dc
from ico3d.errors import DivergenceError, InvalidInputError
from ico3d.render import l1, render_oracle


def make_window(rng, splats, frame_range):
    return new_window_model(rng, splats, frame_range,
                            resolutions=(4, 8), feature_dim=4, hidden=16)


def toy_splats(rng, n=30, rgb_low=0.25, rgb_high=0.55):
    splats = random_set(rng, n, sh_degree=0, spread=0.5,
                        scale_range=(0.08, 0.2), opacity_range=(0.5, 0.95))
    splats.sh_coeffs[:, 0, :] = rgb_to_dc(rng.uniform(rgb_low, rgb_high, (n, 3)))
    return splats


def solid_color_window(rng, rgb, frame_range=(0, 5)):
    """One huge opaque splat saturating the viewport with a single color."""
    splats = GaussianSet.from_activated(
        means=[[0.0, 0.0, 0.0]],
        rotations=[[1.0, 0.0, 0.0, 0.0]],
        scales=[[500.0, 500.0, 500.0]],
        opacities=[1.0],
        sh_coeffs=rgb_to_dc(np.asarray(rgb, dtype=np.float64)).reshape(1, 1, 3),
    )
    return make_window(rng, splats, frame_range)


def two_cameras(size=64):
    cam_a = default_camera(size, size, eye=(0.0, 0.0, -3.0))
    cam_b = cam_a.with_pose(look_at((0.8, 0.3, -2.8), (0.0, 0.0, 0.0)))
    return [cam_a, cam_b]


class TestConsistencyLoss:
    def test_identical_windows_zero(self):
        rng = np.random.default_rng(0)
        splats = toy_splats(rng, 12)
        prev = make_window(rng, splats, (0, 10))
        cur = make_window(rng, splats.copy(), (10, 20))
        cam = default_camera(48, 48)
        assert consistency_loss(cur, prev, cam) == 0.0

    def test_solid_colors_give_absolute_difference(self):
        rng = np.random.default_rng(1)
        prev = solid_color_window(rng, (0.2, 0.2, 0.2), (0, 5))
        cur = solid_color_window(rng, (0.7, 0.7, 0.7), (5, 9))
        cam = default_camera(32, 32, eye=(0.0, 0.0, -2.0))
        assert consistency_loss(cur, prev, cam) == pytest.approx(0.5, abs=1e-5)

    def test_random_pair_equals_l1_of_oracle_renders(self):
        rng = np.random.default_rng(2)
        prev = make_window(rng, toy_splats(rng, 15), (0, 8))
        cur = make_window(rng, toy_splats(rng, 15), (8, 14))
        cam = default_camera(40, 40)
        expected = l1(render_oracle(deform(cur, 0.0), cam).rgb,
                      render_oracle(deform(prev, 1.0), cam).rgb)
        assert consistency_loss(cur, prev, cam) == pytest.approx(expected,
                                                                 abs=1e-15)

    def test_non_overlapping_windows_rejected(self):
        rng = np.random.default_rng(3)
        prev = make_window(rng, toy_splats(rng, 5), (0, 8))
        cur = make_window(rng, toy_splats(rng, 5), (9, 14))
        with pytest.raises(InvalidInputError):
            consistency_loss(cur, prev, default_camera(16, 16))


class TestFinetuneWindow:
    def test_already_consistent_stays_at_fixed_point(self):
        rng = np.random.default_rng(4)
        splats = toy_splats(rng, 10)
        prev = make_window(rng, splats, (0, 10))
        cur = make_window(rng, splats.copy(), (10, 20))
        cams = two_cameras(32)
        recon = [(0.5, cams[0],
                  render_oracle(deform(cur, 0.5), cams[0]).rgb)]
        initial = consistency_loss(cur, prev, cams[0])
        tuned, trace = finetune_window(cur, prev, cams, 40, recon,
                                       np.random.default_rng(5))
        assert consistency_loss(tuned, prev, cams[0]) <= initial + 1e-6
        np.testing.assert_array_equal(tuned.canonical.sh_coeffs,
                                      cur.canonical.sh_coeffs)

    def test_color_perturbed_window_recovers(self):
        rng = np.random.default_rng(6)
        splats = toy_splats(rng, 30)
        prev = make_window(rng, splats, (0, 10))

        perturbed = splats.copy()
        perturbed.sh_coeffs[:, 0, :] += 0.3
        cur = make_window(rng, perturbed, (10, 20))
        cams = two_cameras(64)
        # ground truth for reconstruction steps: the unperturbed scene
        recon = [(t, cam, render_oracle(deform(prev, 1.0), cam).rgb)
                 for t in (0.0, 0.5) for cam in cams]
        before = consistency_loss(cur, prev, cams[0])
        tuned, trace = finetune_window(cur, prev, cams, 500, recon,
                                       np.random.default_rng(7))
        after = consistency_loss(tuned, prev, cams[0])
        assert after <= 0.5 * before
        # the input window is untouched
        assert consistency_loss(cur, prev, cams[0]) == pytest.approx(before)

    def test_previous_window_frozen(self):
        rng = np.random.default_rng(8)
        splats = toy_splats(rng, 8)
        prev = make_window(rng, splats, (0, 10))
        cur = make_window(rng, toy_splats(rng, 8), (10, 20))
        prev_means = prev.canonical.means.copy()
        prev_sh = prev.canonical.sh_coeffs.copy()
        cams = [default_camera(24, 24)]
        recon = [(0.0, cams[0], render_oracle(deform(cur, 0.0), cams[0]).rgb)]
        finetune_window(cur, prev, cams, 20, recon, np.random.default_rng(9))
        np.testing.assert_array_equal(prev.canonical.means, prev_means)
        np.testing.assert_array_equal(prev.canonical.sh_coeffs, prev_sh)

    def test_mlp_and_blend_frozen(self):
        rng = np.random.default_rng(10)
        prev = make_window(rng, toy_splats(rng, 8), (0, 10))
        cur = make_window(rng, toy_splats(rng, 8), (10, 20))
        w_before = [w.copy() for w in cur.mlp.weights]
        blend_before = cur.blend.copy()
        cams = [default_camera(24, 24)]
        recon = [(0.0, cams[0], np.zeros((24, 24, 3)))]
        tuned, _ = finetune_window(cur, prev, cams, 20, recon,
                                   np.random.default_rng(11))
        for got, orig in zip(tuned.mlp.weights, w_before):
            np.testing.assert_array_equal(got, orig)
        np.testing.assert_array_equal(tuned.blend, blend_before)

    def test_schedule_is_three_quarters_consistency(self):
        rng = np.random.default_rng(12)
        prev = make_window(rng, toy_splats(rng, 5), (0, 4))
        cur = make_window(rng, toy_splats(rng, 5), (4, 8))
        cams = [default_camera(16, 16)]
        recon = [(0.0, cams[0], render_oracle(deform(cur, 0.0), cams[0]).rgb)]
        _, trace = finetune_window(cur, prev, cams, 1000, recon,
                                   np.random.default_rng(13))
        assert len(trace.kinds) == 1000
        assert 0.74 <= trace.fraction("consistency") <= 0.76
        # the pattern is deterministic: every 4th step reconstructs
        assert trace.kinds[:8] == ["consistency", "consistency", "consistency",
                                   "recon"] * 2

    def test_nan_target_raises_divergence(self):
        rng = np.random.default_rng(14)
        prev = make_window(rng, toy_splats(rng, 5), (0, 4))
        cur = make_window(rng, toy_splats(rng, 5), (4, 8))
        cams = [default_camera(16, 16)]
        bad = np.full((16, 16, 3), np.nan)
        with pytest.raises(DivergenceError):
            finetune_window(cur, prev, cams, 8, [(0.0, cams[0], bad)],
                            np.random.default_rng(15))

    def test_empty_cameras_or_recon_rejected(self):
        rng = np.random.default_rng(16)
        prev = make_window(rng, toy_splats(rng, 5), (0, 4))
        cur = make_window(rng, toy_splats(rng, 5), (4, 8))
        cam = default_camera(16, 16)
        with pytest.raises(InvalidInputError):
            finetune_window(cur, prev, [], 4, [(0.0, cam, np.zeros((16, 16, 3)))],
                            np.random.default_rng(17))
        with pytest.raises(InvalidInputError):
            finetune_window(cur, prev, [cam], 4, [], np.random.default_rng(18))

    def test_non_overlapping_windows_rejected(self):
        rng = np.random.default_rng(19)
        prev = make_window(rng, toy_splats(rng, 5), (0, 4))
        cur = make_window(rng, toy_splats(rng, 5), (5, 9))
        cam = default_camera(16, 16)
        with pytest.raises(InvalidInputError):
            finetune_window(cur, prev, [cam], 4,
                            [(0.0, cam, np.zeros((16, 16, 3)))],
                            np.random.default_rng(20))

    def test_loss_trace_recorded(self):
        rng = np.random.default_rng(21)
        prev = make_window(rng, toy_splats(rng, 5), (0, 4))
        cur = make_window(rng, toy_splats(rng, 5), (4, 8))
        cams = [default_camera(16, 16)]
        recon = [(0.0, cams[0], render_oracle(deform(cur, 0.0), cams[0]).rgb)]
        _, trace = finetune_window(cur, prev, cams, 12, recon,
                                   np.random.default_rng(22))
        assert len(trace.losses) == 12
        assert all(np.isfinite(v) for v in trace.losses)
