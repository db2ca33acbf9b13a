"""Temporal stage: backwards reprojection, accumulation and history rectification.

Per frame and per channel the stage (1) samples the previous accumulated
history through the motion vectors with a per-tap geometry consistency test,
(2) optionally rectifies the history color against the statistics of the
current noisy neighborhood, (3) blends it with the current sample, and
(4) estimates per-pixel luminance variance, falling back to spatial moments
while the history is too short to trust.

Rectification runs on the reprojected color *before* the blend, and its
bounding box comes from the current frame's noisy channel; history length is
deliberately not reset when the box modifies a color, so the technique's
known failure mode (dropping low-probability paths) is reproduced rather
than patched.
"""

from __future__ import annotations

import numpy as np

from .frames import ChannelKind, DenoiseConfig, GBufferFrame, TemporalHistory
from .tonemap import luma

HISTORY_CAP = 256


def channel_luma(data: np.ndarray) -> np.ndarray:
    """Per-pixel luminance: Rec.709 for RGB, identity for scalar channels."""
    if data.ndim == 3 and data.shape[2] == 3:
        return luma(data)
    return np.asarray(data, dtype=np.float64).reshape(data.shape[0], data.shape[1], -1)[:, :, 0]


def _as_planes(data: np.ndarray) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr[:, :, None] if arr.ndim == 2 else arr


def consistency_test(prev_depth, prev_normal, prev_oid, curr_depth, curr_normal,
                     curr_oid, depth_threshold=0.1, normal_threshold=0.9):
    """Geometry agreement between a previous-frame texel and a current pixel.

    Accepts scalars or broadcastable arrays; true iff the object ids match,
    relative depth differs by less than `depth_threshold` and the normals
    agree beyond `normal_threshold`.
    """
    id_ok = np.asarray(prev_oid) == np.asarray(curr_oid)
    with np.errstate(invalid="ignore"):
        rel = np.abs(np.asarray(prev_depth, dtype=np.float64) - curr_depth) \
            / np.maximum(np.abs(np.asarray(curr_depth, dtype=np.float64)), 1e-8)
        depth_ok = rel < depth_threshold
    ndot = np.sum(np.asarray(prev_normal, dtype=np.float64)
                  * np.asarray(curr_normal, dtype=np.float64), axis=-1)
    return id_ok & depth_ok & (ndot > normal_threshold)


def reproject(prev: TemporalHistory, prev_gbuf: GBufferFrame, curr_gbuf: GBufferFrame,
              cfg: DenoiseConfig) -> dict:
    """Bilinearly sample the previous history through the motion vectors.

    Each of the four enclosing texels is consistency-tested against the
    current pixel; the bilinear weights of the passing texels are
    renormalized. Returns arrays: valid, color, moment1, moment2, history_len.
    """
    h, w = curr_gbuf.depth.shape
    c = prev.color.shape[2]
    xs = np.arange(w)[None, :]
    ys = np.arange(h)[:, None]
    # sample position in texel coordinates (pixel center + motion - half texel)
    px = xs + curr_gbuf.motion[:, :, 0].astype(np.float64)
    py = ys + curr_gbuf.motion[:, :, 1].astype(np.float64)
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = px - x0
    fy = py - y0

    curr_depth = curr_gbuf.depth.astype(np.float64)
    curr_normal = curr_gbuf.normal.astype(np.float64)
    curr_oid = curr_gbuf.object_id

    wsum = np.zeros((h, w))
    color = np.zeros((h, w, c))
    m1 = np.zeros((h, w))
    m2 = np.zeros((h, w))
    hist = np.zeros((h, w))

    for dy in (0, 1):
        for dx in (0, 1):
            xt = x0 + dx
            yt = y0 + dy
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            inb = (xt >= 0) & (xt < w) & (yt >= 0) & (yt < h)
            xc = np.clip(xt, 0, w - 1)
            yc = np.clip(yt, 0, h - 1)
            ok = inb & consistency_test(
                prev_gbuf.depth[yc, xc], prev_gbuf.normal[yc, xc],
                prev_gbuf.object_id[yc, xc],
                curr_depth, curr_normal, curr_oid,
                cfg.depth_consistency, cfg.normal_consistency)
            tw = weight * ok
            wsum += tw
            color += tw[..., None] * prev.color[yc, xc]
            m1 += tw * prev.moment1[yc, xc]
            m2 += tw * prev.moment2[yc, xc]
            hist += tw * prev.history_len[yc, xc]

    valid = (wsum > 1e-8) & (curr_oid != 0)
    norm = np.where(valid, wsum, 1.0)
    color = np.where(valid[..., None], color / norm[..., None], 0.0)
    m1 = np.where(valid, m1 / norm, 0.0)
    m2 = np.where(valid, m2 / norm, 0.0)
    hist_len = np.where(valid, np.maximum(1, np.floor(hist / norm + 1e-9)), 0).astype(np.int32)
    return {"valid": valid, "color": color, "moment1": m1, "moment2": m2,
            "history_len": hist_len}


def neighborhood_stats(channel: np.ndarray, radius: int = 1):
    """Componentwise mean/stddev over the in-bounds (2r+1)^2 neighborhood."""
    data = _as_planes(channel)
    h, w, c = data.shape
    xs = np.arange(w)[None, :]
    ys = np.arange(h)[:, None]
    s0 = np.zeros((h, w))
    s1 = np.zeros((h, w, c))
    s2 = np.zeros((h, w, c))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            xt = xs + dx
            yt = ys + dy
            inb = (xt >= 0) & (xt < w) & (yt >= 0) & (yt < h)
            vals = data[np.clip(yt, 0, h - 1), np.clip(xt, 0, w - 1)]
            s0 += inb
            s1 += inb[..., None] * vals
            s2 += inb[..., None] * vals * vals
    mu = s1 / s0[..., None]
    var = np.maximum(0.0, s2 / s0[..., None] - mu * mu)
    return mu, np.sqrt(var)


def rectify_history(tap_color: np.ndarray, curr_channel: np.ndarray, gamma: float,
                    mode: str):
    """Constrain history colors to the current 3x3 statistical bounding box.

    clamp: componentwise projection into [mu - gamma*sigma, mu + gamma*sigma].
    clip: move along the segment from mu towards the color until it enters
    the box, preserving the deviation direction.

    Returns (rectified, mu, sigma); mu/sigma are exposed so callers can assert
    the containment property.
    """
    tap = _as_planes(tap_color)
    mu, sigma = neighborhood_stats(curr_channel)
    half = gamma * sigma
    if mode == "clamp":
        rect = np.clip(tap, mu - half, mu + half)
    elif mode == "clip":
        dev = tap - mu
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.abs(dev) > 0.0, np.abs(dev) / half, 0.0)
        ratio = np.where(np.isfinite(ratio), ratio, np.inf)
        rmax = ratio.max(axis=2)
        scale = np.where(rmax > 1.0, 1.0 / np.where(rmax > 1.0, rmax, 1.0), 1.0)
        # a zero-extent box along a deviating axis collapses onto the mean
        scale = np.where(np.isinf(rmax), 0.0, scale)
        rect = mu + scale[..., None] * dev
    else:
        raise ValueError(f"unknown rectification mode {mode!r}")
    return rect, mu, sigma


def rectify_moments(m1: np.ndarray, m2: np.ndarray, rect_luma: np.ndarray):
    """Pull stored moments halfway toward the rectified color's luminance.

    Keeps moment2 >= moment1^2 whenever the inputs satisfied it.
    """
    new_m1 = 0.5 * (m1 + rect_luma)
    new_m2 = 0.5 * (m2 + rect_luma * rect_luma)
    return new_m1, new_m2


def accumulate(curr_value: np.ndarray, curr_luma: np.ndarray, tap: dict,
               alpha: float, moments_alpha: float,
               cap: int = HISTORY_CAP) -> TemporalHistory:
    """Exponential blend of the current sample into the reprojected history.

    While the history is short the blend degenerates to a plain running mean
    (a = max(alpha, 1/(N+1))); invalid taps restart the history at length 1.
    """
    curr = _as_planes(curr_value)
    valid = tap["valid"]
    n = tap["history_len"].astype(np.float64)
    a = np.maximum(alpha, 1.0 / (n + 1.0))
    am = np.maximum(moments_alpha, 1.0 / (n + 1.0))

    color = np.where(valid[..., None],
                     tap["color"] + a[..., None] * (curr - tap["color"]),
                     curr)
    m1 = np.where(valid, tap["moment1"] + am * (curr_luma - tap["moment1"]), curr_luma)
    m2 = np.where(valid, tap["moment2"] + am * (curr_luma**2 - tap["moment2"]), curr_luma**2)
    length = np.where(valid, np.minimum(tap["history_len"] + 1, cap), 1).astype(np.int32)
    return TemporalHistory(color=color, moment1=m1, moment2=m2, history_len=length)


def estimate_variance(history: TemporalHistory, curr_luma: np.ndarray,
                      curr_gbuf: GBufferFrame, min_history: int,
                      cfg: DenoiseConfig) -> np.ndarray:
    """Per-pixel luminance variance.

    Temporal (moment2 - moment1^2) once at least `min_history` frames have
    been integrated; otherwise spatial moments of the current luminance over
    the 7x7 neighborhood restricted to geometry-consistent pixels.
    """
    temporal = np.maximum(0.0, history.moment2 - history.moment1**2)

    h, w = curr_luma.shape
    xs = np.arange(w)[None, :]
    ys = np.arange(h)[:, None]
    depth = curr_gbuf.depth.astype(np.float64)
    normal = curr_gbuf.normal.astype(np.float64)
    oid = curr_gbuf.object_id
    s0 = np.zeros((h, w))
    s1 = np.zeros((h, w))
    s2 = np.zeros((h, w))
    for dy in range(-3, 4):
        for dx in range(-3, 4):
            xt = xs + dx
            yt = ys + dy
            inb = (xt >= 0) & (xt < w) & (yt >= 0) & (yt < h)
            xc = np.clip(xt, 0, w - 1)
            yc = np.clip(yt, 0, h - 1)
            ok = inb & consistency_test(depth[yc, xc], normal[yc, xc], oid[yc, xc],
                                        depth, normal, oid,
                                        cfg.depth_consistency, cfg.normal_consistency)
            lv = curr_luma[yc, xc]
            s0 += ok
            s1 += ok * lv
            s2 += ok * lv * lv
    s0 = np.maximum(s0, 1.0)
    m1 = s1 / s0
    spatial = np.maximum(0.0, s2 / s0 - m1 * m1)

    return np.where(history.history_len >= min_history, temporal, spatial)


def temporal_step(curr_data: np.ndarray, curr_gbuf: GBufferFrame,
                  prev: TemporalHistory | None, prev_gbuf: GBufferFrame | None,
                  cfg: DenoiseConfig, debug: dict | None = None):
    """One full temporal update for a channel; returns (history, variance)."""
    curr = _as_planes(curr_data)
    curr_l = channel_luma(curr_data)
    h, w, c = curr.shape

    if prev is None or prev_gbuf is None:
        tap = {"valid": np.zeros((h, w), dtype=bool), "color": np.zeros((h, w, c)),
               "moment1": np.zeros((h, w)), "moment2": np.zeros((h, w)),
               "history_len": np.zeros((h, w), dtype=np.int32)}
    else:
        tap = reproject(prev, prev_gbuf, curr_gbuf, cfg)

    if cfg.rectify_mode != "off" and np.any(tap["valid"]):
        rect, mu, sigma = rectify_history(tap["color"], curr, cfg.clamp_gamma,
                                          cfg.rectify_mode)
        rect = np.where(tap["valid"][..., None], rect, tap["color"])
        rl = channel_luma(rect if c > 1 else rect[:, :, 0])
        rm1, rm2 = rectify_moments(tap["moment1"], tap["moment2"], rl)
        tap = dict(tap)
        tap["color"] = rect
        tap["moment1"] = np.where(tap["valid"], rm1, tap["moment1"])
        tap["moment2"] = np.where(tap["valid"], rm2, tap["moment2"])
        if debug is not None:
            debug["rectified"] = rect
            debug["box_mu"] = mu
            debug["box_sigma"] = sigma
            debug["tap_valid"] = tap["valid"]

    history = accumulate(curr, curr_l, tap, cfg.alpha, cfg.moments_alpha,
                         cap=cfg.history_cap)
    variance = estimate_variance(history, curr_l, curr_gbuf,
                                 cfg.spatial_variance_min_history, cfg)
    return history, variance
