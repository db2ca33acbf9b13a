"""Composition: deferred direct lighting, channel blending, sky fill, TAA."""

from __future__ import annotations

import numpy as np

from .frames import GBufferFrame
from .temporal import rectify_history


def shade_direct(gbuf: GBufferFrame, positions: np.ndarray, light_center,
                 intensity) -> np.ndarray:
    """Analytic unshadowed direct term: albedo/pi * I * cos+ / dist^2.

    `positions` are the world-space primary hit points (reconstructed from the
    depth channel); background pixels come out black.
    """
    fg = gbuf.foreground
    to_l = np.asarray(light_center, dtype=np.float64) - positions
    dist2 = np.sum(to_l * to_l, axis=-1)
    ldir = to_l / np.sqrt(np.maximum(dist2, 1e-12))[..., None]
    cos = np.maximum(0.0, np.sum(gbuf.normal.astype(np.float64) * ldir, axis=-1))
    out = (gbuf.albedo.astype(np.float64) / np.pi
           * np.asarray(intensity, dtype=np.float64)
           * (cos / np.maximum(dist2, 1e-12))[..., None])
    return np.where(fg[..., None], out, 0.0)


def composite(direct: np.ndarray, shadow_denoised: np.ndarray,
              specular_denoised: np.ndarray, gbuf: GBufferFrame,
              sky: np.ndarray) -> np.ndarray:
    """Blend: emissive + direct*shadow + specular on geometry, sky elsewhere."""
    fg = gbuf.foreground
    shade = np.asarray(shadow_denoised, dtype=np.float64)
    if shade.ndim == 3:
        shade = shade[:, :, 0]
    out = (gbuf.emissive.astype(np.float64)
           + direct * shade[..., None]
           + np.asarray(specular_denoised, dtype=np.float64))
    return np.where(fg[..., None], out, sky)


def _bilinear_reproject(prev_img: np.ndarray, motion: np.ndarray):
    """Motion-vector bilinear sample of the previous frame; (values, valid)."""
    h, w = prev_img.shape[:2]
    xs = np.arange(w)[None, :]
    ys = np.arange(h)[:, None]
    px = xs + motion[:, :, 0].astype(np.float64)
    py = ys + motion[:, :, 1].astype(np.float64)
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = px - x0
    fy = py - y0
    acc = np.zeros_like(prev_img, dtype=np.float64)
    wsum = np.zeros((h, w))
    for dy in (0, 1):
        for dx in (0, 1):
            xt = x0 + dx
            yt = y0 + dy
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            inb = (xt >= 0) & (xt < w) & (yt >= 0) & (yt < h)
            tw = weight * inb
            vals = prev_img[np.clip(yt, 0, h - 1), np.clip(xt, 0, w - 1)]
            acc += tw[..., None] * vals
            wsum += tw
    valid = wsum > 1e-8
    norm = np.where(valid, wsum, 1.0)
    return acc / norm[..., None], valid


def taa(curr: np.ndarray, prev_taa: np.ndarray | None, gbuf: GBufferFrame,
        gamma: float = 1.0, blend: float = 0.1) -> np.ndarray:
    """Simplified temporal antialiasing.

    The previous TAA output is reprojected through the motion vectors,
    rectified by variance color clamping against the current 3x3 RGB
    neighborhood, then blended with weight `blend` toward the current frame.
    First frame (or invalid reprojection) passes the current frame through.
    No subpixel jitter is applied: the synthesizer already integrates over
    the pixel footprint through its sample stream.
    """
    curr = np.asarray(curr, dtype=np.float64)
    if prev_taa is None:
        return curr.copy()
    hist, valid = _bilinear_reproject(np.asarray(prev_taa, dtype=np.float64),
                                      gbuf.motion)
    rect, _mu, _sigma = rectify_history(hist, curr, gamma, "clamp")
    out = rect + blend * (curr - rect)
    return np.where(valid[..., None], out, curr)
