"""Acceptance gate: one test per top-level engine guarantee.

Every guarantee the engine ships under is restated here as a single test at
its stated tolerance and (where applicable) wall-clock budget, so that
`pytest -v tests/test_acceptance.py` prints one pass/fail line per
guarantee. The tests only go through public entry points and independent
oracles (scipy matrix functions, central finite differences, brute-force
re-accumulation); they never reach into implementation internals.

The 8-worker scaling guarantee needs at least eight physical cores; on
smaller machines it runs anyway and is marked xfail with the measured
ratio in the failure message.
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg

from ico3d.anim import ActionSegment, KeyframeLibrary, plan_action
from ico3d.body import (LEAKY_SLOPE, MAX_WINDOW_CAP, consistency_loss,
                        deform, deform_at_frame, finetune_window,
                        new_window_model, partition_windows, tunable_layer)
from ico3d.compose import RigAlignment, align_head_to_body, composed_transform
from ico3d.convo import mock_tts, wav_duration
from ico3d.core import default_camera, random_set
from ico3d.core.pose import Pose, interpolate_pose, se3_exp, se3_log
from ico3d.core.quaternion import quat_to_rotmat, random_unit_quats
from ico3d.core.sh import rgb_to_dc
from ico3d.head import (blend_features, fit_head, head_backward, head_forward,
                        new_head_model)
from ico3d.render import (oracle_backward, render_oracle, render_tiled,
                          warmup_kernels)

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


def test_renderer_equivalence():
    """Tiled and oracle renderers agree to 1e-3 per pixel on 50 seeded scenes."""
    warmup_kernels()
    start = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(20, 501))
        gs = random_set(rng, n, sh_degree=int(rng.integers(0, 4)),
                        center=(0.0, 0.0, 3.0), spread=1.0,
                        scale_range=(0.02, 0.15))
        eye = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                        rng.uniform(-1.0, 0.5)])
        cam = default_camera(128, 128, eye=eye, target=(0.0, 0.0, 3.0))
        bg = tuple(rng.uniform(0.0, 1.0, 3))
        tiled = render_tiled(gs, cam, background=bg)
        oracle = render_oracle(gs, cam, background=bg)
        worst = max(worst,
                    float(np.abs(tiled.rgb - oracle.rgb).max()),
                    float(np.abs(tiled.alpha - oracle.alpha).max()))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-3, f"max per-pixel deviation {worst:.2e}"
    assert elapsed < 60.0, f"took {elapsed:.1f} s"


def test_gradient_fidelity():
    """Analytic gradients match central differences: 1e-4 (1e-3 for means)."""
    start = time.perf_counter()
    h = 1e-6

    def rel(fd, an):
        return abs(fd - an) / max(abs(fd), abs(an), 1e-12)

    # image-space gradients of the oracle renderer on a 20-splat scene
    rng = np.random.default_rng(0)
    gs = random_set(rng, 20, sh_degree=0, center=(0, 0, 3.0), spread=0.6,
                    scale_range=(0.03, 0.12), opacity_range=(0.15, 0.85))
    cam = default_camera(48, 48, eye=(0, 0, 0), target=(0, 0, 1))
    target = rng.uniform(0.0, 1.0, size=(48, 48, 3))
    color = rng.uniform(0.1, 0.9, size=(20, 3))
    opac = rng.uniform(0.15, 0.85, size=20)

    def loss(c=None, o=None):
        frame = render_oracle(gs, cam,
                              color_override=color if c is None else c,
                              opacity_override=opac if o is None else o)
        return float(np.abs(frame.rgb - target).mean())

    grads = oracle_backward(gs, cam, target, color_override=color,
                            opacity_override=opac)
    checked = 0
    for i in range(20):
        for c in range(3):
            if abs(grads.color[i, c]) <= 1e-6:
                continue
            plus, minus = color.copy(), color.copy()
            plus[i, c] += h
            minus[i, c] -= h
            fd = (loss(c=plus) - loss(c=minus)) / (2 * h)
            assert rel(fd, grads.color[i, c]) <= 1e-4
            checked += 1
    assert checked >= 20

    for i in range(20):
        if abs(grads.opacity[i]) <= 1e-6:
            continue
        plus, minus = opac.copy(), opac.copy()
        plus[i] += h
        minus[i] -= h
        fd = (loss(o=plus) - loss(o=minus)) / (2 * h)
        assert rel(fd, grads.opacity[i]) <= 1e-4

    # mean gradients: the renderer is piecewise smooth (alpha-skip and cull
    # are step discontinuities), so restrict to splats whose footprint lies
    # strictly inside the viewport and allow one re-probe at a smaller h
    from ico3d.render import project
    proj = project(gs, cam)
    interior = np.zeros(20, dtype=bool)
    m2d, r = proj.mean2d, proj.radius
    inside = ((m2d[:, 0] - r >= 2) & (m2d[:, 0] + r <= cam.width - 3)
              & (m2d[:, 1] - r >= 2) & (m2d[:, 1] + r <= cam.height - 3))
    interior[proj.index[inside]] = True

    def fd_mean(i, d, step):
        plus, minus = gs.copy(), gs.copy()
        plus.means[i, d] += step
        minus.means[i, d] -= step
        kw = dict(color_override=color, opacity_override=opac)
        return (float(np.abs(render_oracle(plus, cam, **kw).rgb - target).mean())
                - float(np.abs(render_oracle(minus, cam, **kw).rgb - target).mean())
                ) / (2 * step)

    checked = 0
    for i in range(20):
        if not interior[i]:
            continue
        for d in range(3):
            an = grads.mean[i, d]
            if abs(an) <= 1e-6:
                continue
            if rel(fd_mean(i, d, 1e-6), an) > 1e-3:
                assert rel(fd_mean(i, d, 1e-5), an) <= 1e-3
            checked += 1
    assert checked >= 15

    # expression-model gradients, every parameter of a small model
    rng = np.random.default_rng(1)
    model = new_head_model(rng, 5, latent_dim=6, pe_levels=2, hidden=10)
    model.basis[:] = rng.normal(scale=0.15, size=model.basis.shape)
    model.bias[:] = rng.normal(scale=0.3, size=model.bias.shape)
    means = rng.normal(scale=0.4, size=(5, 3))
    e = np.concatenate([rng.uniform(0.2, 1.0, 32), rng.uniform(0.2, 1.0, 7)])
    t_rgb = rng.uniform(0, 1, (5, 3))
    t_op = rng.uniform(0, 1, 5)
    hgrads = head_backward(model, e, means, t_rgb, t_op)

    def head_loss():
        rgb, op = head_forward(model, e, means)
        resid = np.concatenate([rgb - t_rgb, (op - t_op)[:, None]], axis=1)
        return float(0.8 * np.abs(resid).mean() + 0.2 * (resid ** 2).mean())

    hstep = 1e-5
    for name, param in model.params().items():
        flat = param.reshape(-1)
        gflat = hgrads.params()[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + hstep
            lp = head_loss()
            flat[idx] = orig - hstep
            lm = head_loss()
            flat[idx] = orig
            fd = (lp - lm) / (2 * hstep)
            assert abs(fd - gflat[idx]) <= 1e-4 * max(abs(fd), abs(gflat[idx])) + 1e-10, \
                f"{name}[{idx}]: fd={fd} analytic={gflat[idx]}"

    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.1f} s"


def _random_twists(seed, n, max_angle=np.pi - 1e-3):
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=(n, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    angles = rng.uniform(0, max_angle, size=(n, 1))
    v = rng.normal(scale=1.5, size=(n, 3))
    return np.concatenate([v, axis * angles], axis=1)


def test_se3_machinery():
    """One-hot exact to 1e-12; log/exp roundtrip 1e-9; screw midpoint 1e-9."""
    poses = [se3_exp(t) for t in _random_twists(0, 6, max_angle=2.8)]
    for c in range(6):
        beta = np.zeros(6)
        beta[c] = 1.0
        got = interpolate_pose(poses, beta)
        assert np.abs(got.matrix - poses[c].matrix).max() <= 1e-12

    twists = _random_twists(1, 1000)
    worst = max(float(np.abs(se3_log(se3_exp(t)) - t).max()) for t in twists)
    assert worst <= 1e-9, f"roundtrip deviation {worst:.2e}"

    # screw midpoints against the scipy matrix-function oracle
    for t in _random_twists(2, 50, max_angle=3.0):
        end = se3_exp(t)
        got = interpolate_pose([Pose(np.eye(4)), end], np.array([0.5, 0.5]))
        oracle = scipy.linalg.expm(0.5 * scipy.linalg.logm(end.matrix)).real
        assert np.abs(got.matrix - oracle).max() <= 1e-9


def _brute_force_boundaries(per_transition, v_thresh, cap):
    # from boundary b, the next boundary is the smallest frame f with
    # sum(motion[b:f]) >= v_thresh or window length hitting the cap,
    # recomputing the prefix sum from scratch every time
    n_frames = len(per_transition) + 1
    boundaries = [0]
    while True:
        b = boundaries[-1]
        nxt = None
        for f in range(b + 1, n_frames - 1):
            if sum(per_transition[b:f]) >= v_thresh or f - b + 1 >= cap:
                nxt = f
                break
        if nxt is None:
            break
        boundaries.append(nxt)
    boundaries.append(n_frames - 1)
    return boundaries


def test_window_partitioner():
    """Exact integer match with brute-force accumulation on 1000 signals."""
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n_trans = int(rng.integers(1, 120))
        motion = rng.uniform(0.0, 3.0, n_trans)
        spikes = rng.random(n_trans) < 0.1
        motion[spikes] += rng.uniform(5.0, 40.0, int(spikes.sum()))
        v_thresh = float(rng.uniform(0.5, 25.0))
        cap = int(rng.integers(3, MAX_WINDOW_CAP + 1))
        plan = partition_windows(motion, v_thresh, cap)
        got = [r[0] for r in plan.ranges] + [plan.ranges[-1][1]]
        assert got == _brute_force_boundaries(motion, v_thresh, cap)
        # full coverage with exactly-one-frame overlaps
        assert plan.ranges[0][0] == 0
        assert plan.ranges[-1][1] == n_trans
        for a, b in zip(plan.ranges, plan.ranges[1:]):
            assert b[0] == a[1]


def _random_pose(rng):
    rot = quat_to_rotmat(random_unit_quats(rng, 1)[0])
    return Pose.from_rt(rot, rng.normal(size=3))


def test_alignment():
    """Composed transform = five-factor chain 1e-10; roundtrip 1e-10; rigid 1e-9."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        rig = RigAlignment(
            c_ref_w1=_random_pose(rng), c_ref_w2=_random_pose(rng),
            h_ref_w1=_random_pose(rng), h_ref_w2=_random_pose(rng),
            h_i_w2=[_random_pose(rng) for _ in range(4)])
        frame = int(rng.integers(4))
        chain = (np.linalg.inv(rig.c_ref_w2.matrix)
                 @ rig.h_i_w2[frame].matrix
                 @ rig.h_ref_w2.matrix
                 @ np.linalg.inv(rig.h_ref_w1.matrix)
                 @ rig.c_ref_w1.matrix)
        assert np.abs(composed_transform(rig, frame).matrix - chain).max() <= 1e-10

    # coincident capture setups: mapping learned geometry back through the
    # composed transform recovers the observed points
    for _ in range(20):
        c_ref, h_ref = _random_pose(rng), _random_pose(rng)
        h_i = [_random_pose(rng) for _ in range(3)]
        rig = RigAlignment(c_ref_w1=c_ref, c_ref_w2=c_ref,
                           h_ref_w1=h_ref, h_ref_w2=h_ref, h_i_w2=h_i)
        for frame in range(3):
            observed = rng.normal(size=(25, 3))
            learned = (c_ref.inverse().compose(h_i[frame].inverse())
                       .compose(c_ref)).apply(observed)
            roundtrip = align_head_to_body(rig, learned, frame)
            assert np.abs(roundtrip - observed).max() <= 1e-10

    # rigidity: pairwise distances preserved to 1e-9 relative
    rig = RigAlignment(
        c_ref_w1=_random_pose(rng), c_ref_w2=_random_pose(rng),
        h_ref_w1=_random_pose(rng), h_ref_w2=_random_pose(rng),
        h_i_w2=[_random_pose(rng) for _ in range(2)])
    pts = rng.normal(size=(40, 3))
    moved = align_head_to_body(rig, pts, frame=1)
    before = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    after = np.linalg.norm(moved[:, None] - moved[None, :], axis=-1)
    assert np.abs(after - before).max() <= 1e-9 * max(1.0, float(before.max()))


def test_head_expression_model():
    """Zero expression = base feature; zero init = static; self-recovery 1e-3."""
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    model = new_head_model(rng, 8)
    model.basis[:] = rng.normal(scale=0.2, size=model.basis.shape)
    model.bias[:] = rng.normal(scale=0.3, size=model.bias.shape)
    np.testing.assert_array_equal(blend_features(model, np.zeros(39)),
                                  model.bias)

    fresh = new_head_model(rng, 8)    # zero-init basis
    means = rng.normal(size=(8, 3))
    e1 = np.concatenate([rng.uniform(-1, 1, 32), rng.uniform(0, 1, 7)])
    e2 = np.concatenate([rng.uniform(-1, 1, 32), rng.uniform(0, 1, 7)])
    rgb1, op1 = head_forward(fresh, e1, means)
    rgb2, op2 = head_forward(fresh, e2, means)
    np.testing.assert_array_equal(rgb1, rgb2)
    np.testing.assert_array_equal(op1, op2)

    # self-recovery: fit a fresh model to another model's outputs, 10 seeds
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        n = 10
        means = rng.normal(scale=0.3, size=(n, 3))
        hidden = new_head_model(rng, n)
        hidden.basis[:] = rng.normal(scale=0.15, size=hidden.basis.shape)
        hidden.bias[:] = rng.normal(scale=0.3, size=hidden.bias.shape)
        dataset = []
        for _ in range(12):
            e = np.concatenate([rng.uniform(-1, 1, 32), rng.uniform(0, 1, 7)])
            rgb, op = head_forward(hidden, e, means)
            dataset.append((e, rgb, op))
        fitted, _ = fit_head(new_head_model(np.random.default_rng(seed), n),
                             means, dataset, 2000)
        mse = np.mean([
            float(np.mean(np.concatenate(
                [(head_forward(fitted, e, means)[0] - rgb) ** 2,
                 ((head_forward(fitted, e, means)[1] - op) ** 2)[:, None]],
                axis=1)))
            for e, rgb, op in dataset])
        assert mse <= 1e-3, f"seed {seed}: recovery MSE {mse:.2e}"
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0, f"took {elapsed:.1f} s"


def test_body_deformation_model():
    """Zero init = identity; one-hot mode = plain layer; tuning halves loss."""
    rng = np.random.default_rng(0)
    canonical = random_set(rng, 12, sh_degree=0)
    window = new_window_model(rng, canonical, (0, 8), resolutions=(4, 8),
                              feature_dim=4, hidden=16)
    for frame in (0, 3, 8):
        out = deform_at_frame(window, frame)
        np.testing.assert_array_equal(out.means, canonical.means)
        np.testing.assert_array_equal(out.rotations, canonical.rotations)
        np.testing.assert_array_equal(out.scale_logs, canonical.scale_logs)

    # one-hot mode weights reduce the tunable layer to an ordinary layer
    x = rng.normal(size=(30, 7))
    weights = rng.normal(size=(4, 7, 5))
    biases = rng.normal(size=(4, 5))
    for k in range(4):
        alpha = np.zeros(4)
        alpha[k] = 1.0
        got = tunable_layer(x, alpha, weights, biases)
        pre = x @ weights[k] + biases[k]
        plain = np.where(pre >= 0, pre, LEAKY_SLOPE * pre)
        assert np.abs(got - plain).max() <= 1e-6

    # fine-tuning a color-perturbed window halves the consistency loss
    rng = np.random.default_rng(6)
    splats = random_set(rng, 30, sh_degree=0, spread=0.5,
                        scale_range=(0.08, 0.2), opacity_range=(0.5, 0.95))
    splats.sh_coeffs[:, 0, :] = rgb_to_dc(rng.uniform(0.25, 0.55, (30, 3)))
    prev = new_window_model(rng, splats, (0, 10), resolutions=(4, 8),
                            feature_dim=4, hidden=16)
    perturbed = splats.copy()
    perturbed.sh_coeffs[:, 0, :] += 0.3
    cur = new_window_model(rng, perturbed, (10, 20), resolutions=(4, 8),
                           feature_dim=4, hidden=16)
    cam = default_camera(64, 64, eye=(0.0, 0.0, -3.0))
    recon = [(t, cam, render_oracle(deform(prev, 1.0), cam).rgb)
             for t in (0.0, 0.5)]
    before = consistency_loss(cur, prev, cam)
    tuned, trace = finetune_window(cur, prev, [cam], 500, recon,
                                   np.random.default_rng(7))
    after = consistency_loss(tuned, prev, cam)
    assert after <= 0.5 * before, f"consistency {before:.4f} -> {after:.4f}"

    # alternating schedule: 75% +- 1% of steps are consistency steps
    rng = np.random.default_rng(12)
    prev = new_window_model(rng, random_set(rng, 5, sh_degree=0), (0, 4),
                            resolutions=(4,), feature_dim=2, hidden=8)
    cur = new_window_model(rng, random_set(rng, 5, sh_degree=0), (4, 8),
                           resolutions=(4,), feature_dim=2, hidden=8)
    small = default_camera(16, 16)
    recon = [(0.0, small, render_oracle(deform(cur, 0.0), small).rgb)]
    _, trace = finetune_window(cur, prev, [small], 1000, recon,
                               np.random.default_rng(13))
    assert abs(trace.fraction("consistency") - 0.75) <= 0.01


def test_animation_sync():
    """1000 mock turns: plan length within 1 frame of audio, clean endings."""
    rng = np.random.default_rng(0)
    fps = 30
    for trial in range(1000):
        n_frames = int(rng.integers(4, 120))
        rest_start = int(rng.integers(0, n_frames - 1))
        rest_end = int(rng.integers(rest_start + 1, n_frames))
        n_actions = int(rng.integers(1, 4))
        actions = []
        for _ in range(n_actions):
            a = int(rng.integers(0, n_frames - 1))
            b = int(rng.integers(a + 1, n_frames))
            actions.append(ActionSegment(a, b))
        lib = KeyframeLibrary(n_frames, rest_start, rest_end, tuple(actions))

        text = "x" * int(rng.integers(1, 260))
        audio = mock_tts(text)
        requested = math.ceil(wav_duration(audio) * fps)
        plan = plan_action(lib, requested, rng,
                           blink_rate_hz=float(rng.choice([0.0, 0.37])),
                           fps=fps)
        assert abs(len(plan) - requested) <= 1, \
            f"trial {trial}: plan {len(plan)} vs requested {requested}"
        assert plan.frames[-1] == lib.rest_end
        assert np.abs(np.diff(plan.frames)).max(initial=0) <= 1


def _toy_avatar(tmp_path):
    out = tmp_path / "assets"
    subprocess.run([sys.executable, str(SCRIPTS / "make_toy_avatar.py"),
                    "--out", str(out), "--head-splats", "40",
                    "--body-splats", "40"], check=True, capture_output=True)
    return out / "avatar.i3d"


def test_throughput_tiled_vs_oracle(tmp_path):
    """Tiled >= 10x oracle at 100k splats / 512^2; three-row bench report."""
    warmup_kernels()
    rng = np.random.default_rng(0)
    gs = random_set(rng, 100_000, sh_degree=0, center=(0.0, 0.0, 3.0),
                    spread=1.2, scale_range=(0.01, 0.05),
                    opacity_range=(0.05, 0.3))
    cam = default_camera(512, 512, eye=(0, 0, 0), target=(0, 0, 1))

    t0 = time.perf_counter()
    tiled = render_tiled(gs, cam)
    t_tiled = time.perf_counter() - t0
    t0 = time.perf_counter()
    oracle = render_oracle(gs, cam)
    t_oracle = time.perf_counter() - t0
    assert np.abs(tiled.rgb - oracle.rgb).max() <= 1e-3
    ratio = t_oracle / t_tiled
    assert ratio >= 10.0, f"tiled {t_tiled:.2f} s vs oracle {t_oracle:.2f} s"

    # timing report reproduces the three-configuration row structure, with
    # the reference full-configuration figure reported but never gated
    from ico3d.cli import main as cli_main
    report = tmp_path / "bench.csv"
    code = cli_main(["bench", "--bundle", str(_toy_avatar(tmp_path)),
                     "--resolution", "32x32", "--seconds", "0.15",
                     "--warmup-s", "0.05", "--out", str(report)])
    assert code == 0
    lines = report.read_text().splitlines()
    rows = [ln.split(",")[:3] for ln in lines
            if ln and not ln.startswith("#")][1:]
    assert rows == [["✓", "", ""], ["✓", "✓", ""], ["✓", "✓", "✓"]]
    assert any("105.27" in ln for ln in lines if ln.startswith("#"))


@pytest.mark.xfail(condition=(os.cpu_count() or 1) < 8,
                   reason="worker scaling needs >= 8 physical cores",
                   strict=False)
def test_throughput_worker_scaling():
    """8 workers render >= 4x faster than 1 worker at 100k splats / 512^2."""
    warmup_kernels()
    rng = np.random.default_rng(0)
    gs = random_set(rng, 100_000, sh_degree=0, center=(0.0, 0.0, 3.0),
                    spread=1.2, scale_range=(0.01, 0.05),
                    opacity_range=(0.05, 0.3))
    cam = default_camera(512, 512, eye=(0, 0, 0), target=(0, 0, 1))
    render_tiled(gs, cam, workers=8)    # per-worker-count compile pass
    t0 = time.perf_counter()
    one = render_tiled(gs, cam, workers=1)
    t_one = time.perf_counter() - t0
    t0 = time.perf_counter()
    eight = render_tiled(gs, cam, workers=8)
    t_eight = time.perf_counter() - t0
    np.testing.assert_array_equal(one.rgb, eight.rgb)
    assert t_one / t_eight >= 4.0, \
        f"1 worker {t_one:.2f} s vs 8 workers {t_eight:.2f} s " \
        f"(ratio {t_one / t_eight:.2f} on {os.cpu_count()} cores)"


def test_headless_demo(tmp_path):
    """Demo composes toys, runs a mock turn, writes 30+ frames and a WAV."""
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, str(SCRIPTS / "demo_headless.py"),
         "--out", str(tmp_path / "demo")],
        capture_output=True, text=True, timeout=60)
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    frames = list((tmp_path / "demo" / "frames").glob("frame_*.png"))
    assert len(frames) >= 30
    wav = tmp_path / "demo" / "reply.wav"
    assert wav.stat().st_size > 44    # more than a bare RIFF header
    assert elapsed < 60.0, f"took {elapsed:.1f} s"
