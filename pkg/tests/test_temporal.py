import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtdenoise.frames import DenoiseConfig, GBufferFrame, TemporalHistory
from rtdenoise.temporal import (accumulate, consistency_test, estimate_variance,
                                rectify_history, rectify_moments, reproject,
                                temporal_step)

CFG = DenoiseConfig()


def _flat_gbuf(h=8, w=8, depth=5.0, oid=1):
    normal = np.zeros((h, w, 3), dtype=np.float32)
    normal[:, :, 1] = 1.0
    return GBufferFrame(
        width=w, height=h,
        depth=np.full((h, w), depth, dtype=np.float32),
        normal=normal,
        motion=np.zeros((h, w, 2), dtype=np.float32),
        object_id=np.full((h, w), oid, dtype=np.int32),
        albedo=np.full((h, w, 3), 0.5, dtype=np.float32),
        roughness=np.full((h, w), 0.3, dtype=np.float32),
        emissive=np.zeros((h, w, 3), dtype=np.float32),
    )


def _const_history(h, w, c, value, length=10):
    return TemporalHistory(
        color=np.full((h, w, c), value),
        moment1=np.full((h, w), value),
        moment2=np.full((h, w), value * value),
        history_len=np.full((h, w), length, dtype=np.int32),
    )


# ---------------------------------------------------------------------------
# consistency

def test_consistency_identical_true():
    n = np.array([0.0, 1.0, 0.0])
    assert consistency_test(5.0, n, 1, 5.0, n, 1)


def test_consistency_id_mismatch():
    n = np.array([0.0, 1.0, 0.0])
    assert not consistency_test(5.0, n, 3, 5.0, n, 5)


def test_consistency_depth_threshold():
    n = np.array([0.0, 1.0, 0.0])
    assert not consistency_test(10.0, n, 1, 11.5, n, 1)  # 15% relative, over 10%
    assert consistency_test(10.0, n, 1, 10.5, n, 1)


# ---------------------------------------------------------------------------
# reprojection

def test_zero_motion_identity():
    gbuf = _flat_gbuf()
    hist = _const_history(8, 8, 1, 0.6)
    tap = reproject(hist, gbuf, gbuf, CFG)
    assert tap["valid"].all()
    assert np.allclose(tap["color"], 0.6)
    assert np.all(tap["history_len"] == 10)


def test_motion_beyond_border_invalid():
    gbuf = _flat_gbuf()
    curr = _flat_gbuf()
    curr.motion[:, :, 0] = -(8 + 3)  # 3 pixels past the left edge everywhere
    hist = _const_history(8, 8, 1, 0.6)
    tap = reproject(hist, gbuf, curr, CFG)
    assert not tap["valid"].any()
    assert np.all(tap["color"] == 0.0)
    assert np.all(tap["history_len"] == 0)


def test_half_pixel_motion_over_constant_history():
    gbuf = _flat_gbuf()
    curr = _flat_gbuf()
    curr.motion[:, :, 0] = 0.5
    hist = _const_history(8, 8, 1, 0.6)
    tap = reproject(hist, gbuf, curr, CFG)
    interior = np.zeros((8, 8), dtype=bool)
    interior[:, :-1] = True
    assert tap["valid"][interior].all()
    assert np.allclose(tap["color"][interior], 0.6)


def test_occlusion_reset_history_len_one():
    prev = _flat_gbuf(oid=1)
    curr = _flat_gbuf(oid=1)
    curr.object_id[3, 3] = 2  # a different object now covers this pixel
    hist = _const_history(8, 8, 1, 0.6, length=40)
    tap = reproject(hist, prev, curr, CFG)
    out = accumulate(np.full((8, 8, 1), 0.9), np.full((8, 8), 0.9), tap, 0.2, 0.2)
    assert out.history_len[3, 3] == 1
    assert out.color[3, 3, 0] == pytest.approx(0.9)
    assert out.history_len[0, 0] == 41


# ---------------------------------------------------------------------------
# accumulation

def _invalid_tap(h, w, c):
    return {"valid": np.zeros((h, w), dtype=bool), "color": np.zeros((h, w, c)),
            "moment1": np.zeros((h, w)), "moment2": np.zeros((h, w)),
            "history_len": np.zeros((h, w), dtype=np.int32)}


def test_accumulate_invalid_tap():
    out = accumulate(np.full((2, 2, 1), 0.7), np.full((2, 2), 0.7),
                     _invalid_tap(2, 2, 1), 0.2, 0.2)
    assert np.allclose(out.color, 0.7)
    assert np.allclose(out.moment1, 0.7)
    assert np.allclose(out.moment2, 0.49)
    assert np.all(out.history_len == 1)


def test_accumulate_fixed_point():
    tap = {"valid": np.ones((2, 2), dtype=bool), "color": np.full((2, 2, 1), 0.4),
           "moment1": np.full((2, 2), 0.4), "moment2": np.full((2, 2), 0.16),
           "history_len": np.full((2, 2), 7, dtype=np.int32)}
    out = accumulate(np.full((2, 2, 1), 0.4), np.full((2, 2), 0.4), tap, 0.2, 0.2)
    assert np.allclose(out.color, 0.4)
    assert np.all(out.history_len == 8)


def test_accumulate_lerp_arithmetic():
    tap = {"valid": np.ones((1, 1), dtype=bool), "color": np.zeros((1, 1, 1)),
           "moment1": np.zeros((1, 1)), "moment2": np.zeros((1, 1)),
           "history_len": np.full((1, 1), 100, dtype=np.int32)}
    out = accumulate(np.ones((1, 1, 1)), np.ones((1, 1)), tap, 0.2, 0.2)
    assert out.color[0, 0, 0] == pytest.approx(0.2)


def test_accumulate_short_history_uses_running_mean():
    tap = {"valid": np.ones((1, 1), dtype=bool), "color": np.full((1, 1, 1), 0.5),
           "moment1": np.full((1, 1), 0.5), "moment2": np.full((1, 1), 0.25),
           "history_len": np.ones((1, 1), dtype=np.int32)}
    out = accumulate(np.ones((1, 1, 1)), np.ones((1, 1)), tap, 0.2, 0.2)
    # N=1: a = max(0.2, 1/2) = 0.5
    assert out.color[0, 0, 0] == pytest.approx(0.75)


def test_history_cap():
    tap = {"valid": np.ones((1, 1), dtype=bool), "color": np.full((1, 1, 1), 0.5),
           "moment1": np.full((1, 1), 0.5), "moment2": np.full((1, 1), 0.25),
           "history_len": np.full((1, 1), 256, dtype=np.int32)}
    out = accumulate(np.full((1, 1, 1), 0.5), np.full((1, 1), 0.5), tap, 0.2, 0.2)
    assert out.history_len[0, 0] == 256


# ---------------------------------------------------------------------------
# variance

def test_variance_constant_history_zero():
    hist = _const_history(8, 8, 1, 0.6, length=10)
    var = estimate_variance(hist, np.full((8, 8), 0.6), _flat_gbuf(), 4, CFG)
    assert np.allclose(var, 0.0)


def test_variance_moment_arithmetic():
    hist = _const_history(4, 4, 1, 0.0, length=10)
    hist.moment1[:] = 0.5
    hist.moment2[:] = 0.3
    var = estimate_variance(hist, np.zeros((4, 4)), _flat_gbuf(4, 4), 4, CFG)
    assert np.allclose(var, 0.05)


def test_variance_spatial_fallback_checkerboard():
    h = w = 16
    gbuf = _flat_gbuf(h, w)
    ys, xs = np.mgrid[0:h, 0:w]
    luma = ((xs + ys) % 2).astype(np.float64)
    hist = _const_history(h, w, 1, 0.0, length=1)  # below min_history -> spatial
    var = estimate_variance(hist, luma, gbuf, 4, CFG)

    # independent oracle: direct moments over the 7x7 in-bounds window
    y0, x0 = 8, 8
    vals = [luma[y0 + dy, x0 + dx]
            for dy in range(-3, 4) for dx in range(-3, 4)]
    m1 = sum(vals) / len(vals)
    m2 = sum(v * v for v in vals) / len(vals)
    oracle = max(0.0, m2 - m1 * m1)
    assert var[y0, x0] == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(600.0 / 2401.0)


def test_variance_never_negative():
    rs = np.random.default_rng(0)
    hist = _const_history(8, 8, 1, 0.0, length=10)
    hist.moment1[:] = rs.random((8, 8))
    hist.moment2[:] = rs.random((8, 8))  # deliberately inconsistent moments
    var = estimate_variance(hist, rs.random((8, 8)), _flat_gbuf(), 4, CFG)
    assert np.all(var >= 0.0)


# ---------------------------------------------------------------------------
# rectification

def test_rectify_inside_box_unchanged():
    rs = np.random.default_rng(1)
    curr = rs.random((5, 5, 3))
    mu, sigma = np.mean(curr), np.std(curr)
    tap = np.broadcast_to(curr.mean(axis=(0, 1)), (5, 5, 3)).copy()
    for mode in ("clamp", "clip"):
        rect, mu_img, sig_img = rectify_history(tap, curr, 10.0, mode)
        assert np.allclose(rect, tap)


def test_rectify_constant_neighborhood_collapses():
    curr = np.full((5, 5, 3), 0.3)
    tap = np.full((5, 5, 3), 0.9)
    for mode in ("clamp", "clip"):
        rect, _m, _s = rectify_history(tap, curr, 1.0, mode)
        assert np.allclose(rect, 0.3)


def _clip_oracle(mu, sigma, gamma, tap):
    """Brute-force segment/box intersection: walk t down from 1 until
    mu + t*(tap-mu) fits inside [mu - gamma*sigma, mu + gamma*sigma]."""
    dev = tap - mu
    for t in np.linspace(1.0, 0.0, 200001):
        if np.all(np.abs(t * dev) <= gamma * sigma + 1e-12):
            return mu + t * dev
    return mu


def test_rectify_axis_deviation_against_oracle():
    # center neighborhood with mean 0 and stddev 1 per channel
    x = 3.0 / np.sqrt(8.0)
    pattern = np.array([x, -x, x, -x, 0.0, x, -x, x, -x]).reshape(3, 3)
    curr = np.stack([pattern] * 3, axis=-1)
    tap = np.zeros((3, 3, 3))
    tap[1, 1] = (2.0, 0.0, 0.0)
    rect_clamp, mu, sigma = rectify_history(tap, curr, 1.0, "clamp")
    rect_clip, _m, _s = rectify_history(tap, curr, 1.0, "clip")
    assert np.allclose(mu[1, 1], 0.0, atol=1e-12)
    assert np.allclose(sigma[1, 1], 1.0, atol=1e-12)
    assert np.allclose(rect_clamp[1, 1], (1.0, 0.0, 0.0))
    oracle = _clip_oracle(mu[1, 1], sigma[1, 1], 1.0, tap[1, 1])
    assert np.allclose(rect_clip[1, 1], oracle, atol=1e-4)
    assert np.allclose(rect_clip[1, 1], (1.0, 0.0, 0.0), atol=1e-9)


@settings(deadline=None, max_examples=60)
@given(st.integers(0, 2**31 - 1), st.floats(0.25, 4.0))
def test_rectified_always_inside_box(seed, gamma):
    rs = np.random.default_rng(seed)
    curr = rs.gamma(1.0, 1.0, size=(6, 6, 3))
    tap = rs.gamma(1.0, 2.0, size=(6, 6, 3))
    for mode in ("clamp", "clip"):
        rect, mu, sigma = rectify_history(tap, curr, gamma, mode)
        assert np.all(np.abs(rect - mu) <= gamma * sigma + 1e-6)


@settings(deadline=None, max_examples=60)
@given(st.integers(0, 2**31 - 1))
def test_clip_preserves_deviation_direction(seed):
    rs = np.random.default_rng(seed)
    curr = rs.random((6, 6, 3))
    tap = rs.random((6, 6, 3)) * 3.0
    rect, mu, _sigma = rectify_history(tap, curr, 1.0, "clip")
    dev_in = tap - mu
    dev_out = rect - mu
    # dev_out = t * dev_in with t in [0, 1]
    num = np.sum(dev_out * dev_in, axis=-1)
    den = np.maximum(np.sum(dev_in * dev_in, axis=-1), 1e-12)
    t = num / den
    assert np.all(t >= -1e-9) and np.all(t <= 1.0 + 1e-9)
    cross = dev_out - t[..., None] * dev_in
    assert np.max(np.abs(cross)) < 1e-9


def test_rectify_moments_keeps_moment_inequality():
    rs = np.random.default_rng(2)
    m1 = rs.random((8, 8))
    m2 = m1 * m1 + rs.random((8, 8))  # valid moments
    rl = rs.random((8, 8)) * 2.0
    n1, n2 = rectify_moments(m1, m2, rl)
    assert np.all(n2 >= n1 * n1 - 1e-12)


# ---------------------------------------------------------------------------
# full step

def test_temporal_step_first_frame():
    gbuf = _flat_gbuf()
    data = np.random.default_rng(3).random((8, 8))
    hist, var = temporal_step(data, gbuf, None, None, CFG)
    assert np.all(hist.history_len == 1)
    assert np.allclose(hist.color[:, :, 0], data)
    assert np.all(var >= 0.0)


def test_temporal_step_static_sequence_grows_history():
    gbuf = _flat_gbuf()
    rs = np.random.default_rng(4)
    hist = None
    prev_gbuf = None
    for _f in range(5):
        hist, _var = temporal_step(rs.random((8, 8)), gbuf, hist, prev_gbuf, CFG)
        prev_gbuf = gbuf
    assert np.all(hist.history_len == 5)
    assert np.all(hist.moment2 >= hist.moment1**2 - 1e-5)
