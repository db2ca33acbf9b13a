"""Variance-guided edge-avoiding a-trous wavelet filtering.

One iteration convolves with the separable B3-spline kernel
(1/16, 1/4, 3/8, 1/4, 1/16) whose taps spread apart by 2^level pixels,
modulated by edge-stopping weights on depth, normal and luminance; the
luminance weight is scaled by the estimated noise deviation so flat noisy
regions blur aggressively while converged regions keep their detail.

Two execution forms are provided: the dense 5x5 gather (25 taps per pixel)
and the separable 5+5 split (10 taps) where the horizontal pass updates the
color only and the variance is updated once, in the vertical pass. The two
are equivalent where the edge weights are uniform and intentionally diverge
across edges, which shows up as slightly stronger blur.

The start level can shift up by one where material features predict heavy
noise (roughness over 0.2, shadow angles over 6 degrees), keeping the
iteration count fixed; with noise-free secondary shading the iteration count
itself adapts to roughness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import ChannelKind, DenoiseConfig, GBufferFrame

KERNEL_1D = np.array([1.0 / 16, 1.0 / 4, 3.0 / 8, 1.0 / 4, 1.0 / 16])
_OFFSETS = (-2, -1, 0, 1, 2)


@dataclass
class EdgeParams:
    sigma_z: float = 1.0
    sigma_n: float = 128.0
    sigma_l: float = 4.0
    epsilon: float = 1e-8

    @classmethod
    def from_config(cls, cfg: DenoiseConfig) -> "EdgeParams":
        return cls(sigma_z=cfg.sigma_z, sigma_n=cfg.sigma_n, sigma_l=cfg.sigma_l)


def edge_weight(center: dict, tap: dict, center_variance: float,
                params: EdgeParams, distance: float = 1.0) -> float:
    """Scalar reference form of the edge-stopping weight; taps of the
    background get weight 0. `distance` is the tap offset length in pixels."""
    if tap["object_id"] == 0:
        return 0.0
    w_z = np.exp(-abs(center["depth"] - tap["depth"])
                 / (params.sigma_z * abs(center["depth"]) * distance + params.epsilon))
    ndot = float(np.dot(center["normal"], tap["normal"]))
    w_n = max(0.0, ndot) ** params.sigma_n
    w_l = np.exp(-abs(center["luma"] - tap["luma"])
                 / (params.sigma_l * np.sqrt(max(center_variance, 0.0)) + params.epsilon))
    return float(w_z * w_n * w_l)


def _luma_of(channel: np.ndarray) -> np.ndarray:
    if channel.shape[2] == 3:
        return channel @ np.array([0.2126, 0.7152, 0.0722])
    return channel[:, :, 0]


def _prep(channel, variance, gbuf):
    data = np.asarray(channel, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    var = np.asarray(variance, dtype=np.float64)
    depth = gbuf.depth.astype(np.float64)
    normal = gbuf.normal.astype(np.float64)
    fg = gbuf.object_id != 0
    return data, var, depth, normal, gbuf.object_id, fg


def _tap_weights(depth, normal, l_img, denom_l, oid, yc, xc, z_c, n_c, l_c, dist,
                 params):
    z_t = depth[yc, xc]
    with np.errstate(invalid="ignore"):
        w_z = np.exp(-np.abs(z_c - z_t) / (params.sigma_z * np.abs(z_c) * dist
                                           + params.epsilon))
    ndot = np.maximum(0.0, np.sum(n_c * normal[yc, xc], axis=-1))
    w_n = ndot ** params.sigma_n
    w_l = np.exp(-np.abs(l_c - l_img[yc, xc]) / denom_l)
    w = w_z * w_n * w_l * (oid[yc, xc] != 0)
    return np.where(np.isfinite(w), w, 0.0)


def atrous_dense(channel, variance, gbuf: GBufferFrame, level, params: EdgeParams,
                 stats: dict | None = None):
    """One dense 5x5 iteration; `level` may be a scalar or a per-pixel array.

    Returns (channel', variance') where variance' carries the variance of the
    weighted mean. Taps are clamped to the image border; the center tap always
    participates with edge weight 1, so the output stays a convex combination.
    """
    data, var, depth, normal, oid, fg = _prep(channel, variance, gbuf)
    h, w, c = data.shape
    step = (2 ** np.asarray(level, dtype=np.int64)) * np.ones((h, w), dtype=np.int64)
    if np.any(2 ** np.asarray(level) >= min(h, w) / 2):
        raise ValueError(f"a-trous level {np.max(level)} too large for {w}x{h}")

    xs = np.arange(w)[None, :]
    ys = np.arange(h)[:, None]
    l_img = _luma_of(data)
    denom_l = params.sigma_l * np.sqrt(np.maximum(var, 0.0)) + params.epsilon
    z_c = depth
    n_c = normal
    l_c = l_img

    acc = np.zeros((h, w, c))
    acc_w = np.zeros((h, w))
    acc_w2v = np.zeros((h, w))
    for j in _OFFSETS:
        for i in _OFFSETS:
            k2 = KERNEL_1D[i + 2] * KERNEL_1D[j + 2]
            xc = np.clip(xs + i * step, 0, w - 1)
            yc = np.clip(ys + j * step, 0, h - 1)
            if i == 0 and j == 0:
                ew = 1.0
            else:
                dist = step * np.hypot(i, j)
                ew = _tap_weights(depth, normal, l_img, denom_l, oid,
                                  yc, xc, z_c, n_c, l_c, dist, params)
            wgt = k2 * ew
            acc += wgt[..., None] * data[yc, xc] if np.ndim(wgt) else wgt * data[yc, xc]
            acc_w += wgt
            acc_w2v += wgt * wgt * var[yc, xc]
    out = acc / acc_w[..., None]
    out_var = acc_w2v / (acc_w * acc_w)
    out = np.where(fg[..., None], out, data)
    out_var = np.where(fg, out_var, var)
    if stats is not None:
        stats["taps"] = stats.get("taps", 0) + h * w * 25
        stats["taps_per_pixel"] = 25
    return (out[:, :, 0] if np.asarray(channel).ndim == 2 else out), out_var


def _separable_pass(data, var_guide, var_taps, depth, normal, oid, step, axis, params,
                    update_variance):
    h, w, c = data.shape
    xs = np.arange(w)[None, :]
    ys = np.arange(h)[:, None]
    l_img = _luma_of(data)
    denom_l = params.sigma_l * np.sqrt(np.maximum(var_guide, 0.0)) + params.epsilon

    acc = np.zeros((h, w, c))
    acc_w = np.zeros((h, w))
    acc_w2v = np.zeros((h, w)) if update_variance else None
    for k in _OFFSETS:
        if axis == 0:
            xc = np.clip(xs + k * step, 0, w - 1)
            yc = np.broadcast_to(ys, (h, w))
        else:
            xc = np.broadcast_to(xs, (h, w))
            yc = np.clip(ys + k * step, 0, h - 1)
        if k == 0:
            ew = 1.0
        else:
            dist = step * abs(k)
            ew = _tap_weights(depth, normal, l_img, denom_l, oid,
                              yc, xc, depth, normal, l_img, dist, params)
        wgt = KERNEL_1D[k + 2] * ew
        acc += (wgt[..., None] if np.ndim(wgt) else wgt) * data[yc, xc]
        acc_w += wgt
        if update_variance:
            acc_w2v += wgt * wgt * var_taps[yc, xc]
    out = acc / acc_w[..., None]
    out_var = acc_w2v / (acc_w * acc_w) if update_variance else None
    return out, out_var


def atrous_separable(channel, variance, gbuf: GBufferFrame, level, params: EdgeParams,
                     stats: dict | None = None):
    """One separable 5+5 iteration: horizontal color-only, then vertical.

    The variance buffer passes through the horizontal stage untouched and is
    updated only by the vertical pass, which is what makes the separable form
    blur slightly more than the dense one across edges.
    """
    data, var, depth, normal, oid, fg = _prep(channel, variance, gbuf)
    h, w, _c = data.shape
    step = (2 ** np.asarray(level, dtype=np.int64)) * np.ones((h, w), dtype=np.int64)
    if np.any(2 ** np.asarray(level) >= min(h, w) / 2):
        raise ValueError(f"a-trous level {np.max(level)} too large for {w}x{h}")

    horiz, _ = _separable_pass(data, var, var, depth, normal, oid, step, axis=0,
                               params=params, update_variance=False)
    out, out_var = _separable_pass(horiz, var, var, depth, normal, oid, step, axis=1,
                                   params=params, update_variance=True)
    out = np.where(fg[..., None], out, data)
    out_var = np.where(fg, out_var, var)
    if stats is not None:
        stats["taps"] = stats.get("taps", 0) + h * w * 10
        stats["taps_per_pixel"] = 10
    return (out[:, :, 0] if np.asarray(channel).ndim == 2 else out), out_var


def select_start_level(kind: ChannelKind, feature, cfg: DenoiseConfig):
    """Starting a-trous level: 1 where the material feature predicts heavy
    noise (specular roughness > 0.2, shadow angle > 6.0 degrees), else 0."""
    feature = np.asarray(feature, dtype=np.float64)
    if not cfg.adaptive_start:
        return np.zeros_like(feature, dtype=np.int64) if feature.ndim else 0
    if kind is ChannelKind.INDIRECT_SPECULAR:
        lvl = feature > cfg.roughness_start_threshold
    else:
        lvl = feature > cfg.shadow_angle_start_threshold
    return lvl.astype(np.int64) if feature.ndim else int(lvl)


def select_iteration_count(roughness, ibl_adaptive: bool, default_iterations: int):
    """Iteration count per roughness when secondary shading is noise-free:
    0 at roughness 0, 1 up to 0.05, otherwise 4."""
    r = np.asarray(roughness, dtype=np.float64)
    if not ibl_adaptive:
        out = np.full_like(r, default_iterations, dtype=np.int64)
        return out if r.ndim else int(default_iterations)
    out = np.where(r <= 0.0, 0, np.where(r <= 0.05, 1, 4))
    return out.astype(np.int64) if r.ndim else int(out)


def denoise_channel(channel, variance, gbuf: GBufferFrame, cfg: DenoiseConfig,
                    kind: ChannelKind, shadow_angle=None,
                    record: list | None = None):
    """Run the configured a-trous iterations for one channel.

    Iteration i filters at level start+i; the output of iteration 0 becomes
    the color fed back into the temporal history (unless feedback is off).
    Returns (final_channel, feedback_channel, iteration_records).
    """
    data = np.asarray(channel, dtype=np.float64)
    scalar_in = data.ndim == 2
    records = record if record is not None else []

    if kind is ChannelKind.INDIRECT_SPECULAR:
        feature = gbuf.roughness.astype(np.float64)
        counts = select_iteration_count(feature, cfg.ibl_adaptive_iterations,
                                        cfg.iterations)
    else:
        if shadow_angle is None:
            shadow_angle = np.zeros_like(gbuf.depth, dtype=np.float64)
        feature = np.asarray(shadow_angle, dtype=np.float64)
        counts = np.full(gbuf.depth.shape, cfg.iterations, dtype=np.int64)
    start = select_start_level(kind, feature, cfg)

    max_count = int(counts.max()) if counts.size else 0
    out = data.copy()
    var = np.asarray(variance, dtype=np.float64).copy()
    feedback = data.copy()
    params = EdgeParams.from_config(cfg)
    filt = atrous_separable if cfg.separable else atrous_dense

    if max_count > 0:
        top = int((start + np.maximum(max_count - 1, 0)).max())
        if 2 ** top >= min(gbuf.depth.shape) / 2:
            raise ValueError(
                f"iterations/levels overflow image size: top level {top} on "
                f"{gbuf.width}x{gbuf.height}")

    for i in range(max_count):
        level = start + i
        stats = {}
        filtered, fvar = filt(out, var, gbuf, level, params, stats=stats)
        active = counts > i
        if scalar_in:
            out = np.where(active, filtered, out)
        else:
            out = np.where(active[..., None], filtered, out)
        var = np.where(active, fvar, var)
        records.append({"iteration": i, "level_min": int(level.min()),
                        "level_max": int(level.max()),
                        "step_min": int(2 ** level.min()),
                        "step_max": int(2 ** level.max()),
                        "taps": stats.get("taps", 0),
                        "taps_per_pixel": stats.get("taps_per_pixel", 0)})
        if i == 0 and cfg.feedback == "first_iteration":
            feedback = out.copy()

    return out, feedback, records
