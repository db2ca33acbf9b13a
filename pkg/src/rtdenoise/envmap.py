"""Latitude-longitude environment maps and their roughness-prefiltered mips.

Level k of a prefiltered map is the spherical convolution of the source
against a normalized cosine-power lobe with exponent e_k = max(1, 2/r_k^2 - 2)
where r_k = k / (levels - 1); level 0 is the source itself. The convolution
is a direct sum over source texels weighted by solid angle, which keeps it
exact, order-independent and BLAS-free (maps are low resolution).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def latlong_directions(width: int, height: int) -> np.ndarray:
    """Unit direction of every texel center, shape (H, W, 3); +Y is up."""
    v = (np.arange(height) + 0.5) / height
    u = (np.arange(width) + 0.5) / width
    theta = np.pi * v[:, None]
    phi = 2.0 * np.pi * u[None, :]
    sin_t = np.sin(theta)
    return np.stack([sin_t * np.cos(phi),
                     np.cos(theta) * np.ones_like(phi),
                     sin_t * np.sin(phi)], axis=-1)


def latlong_solid_angles(width: int, height: int) -> np.ndarray:
    """Solid angle of each texel, shape (H, W); sums to ~4*pi."""
    v = (np.arange(height) + 0.5) / height
    sin_t = np.sin(np.pi * v)
    return np.broadcast_to((2.0 * np.pi / width) * (np.pi / height) * sin_t[:, None],
                           (height, width)).copy()


def sample_latlong(env: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Bilinear lookup of directions in a lat-long map; wraps in azimuth."""
    h, w = env.shape[:2]
    d = np.asarray(dirs, dtype=np.float64)
    y = np.clip(d[..., 1], -1.0, 1.0)
    theta = np.arccos(y)
    phi = np.arctan2(d[..., 2], d[..., 0]) % (2.0 * np.pi)
    fu = phi / (2.0 * np.pi) * w - 0.5
    fv = theta / np.pi * h - 0.5
    u0 = np.floor(fu).astype(np.int64)
    v0 = np.floor(fv).astype(np.int64)
    tu = fu - u0
    tv = fv - v0
    u1 = (u0 + 1) % w
    u0 = u0 % w
    v1 = np.clip(v0 + 1, 0, h - 1)
    v0 = np.clip(v0, 0, h - 1)
    a = env[v0, u0] * (1 - tu)[..., None] + env[v0, u1] * tu[..., None]
    b = env[v1, u0] * (1 - tu)[..., None] + env[v1, u1] * tu[..., None]
    return a * (1 - tv)[..., None] + b * tv[..., None]


def _convolve_cosine_power(env: np.ndarray, exponent: float) -> np.ndarray:
    h, w = env.shape[:2]
    dirs = latlong_directions(w, h).reshape(-1, 3)
    omega = latlong_solid_angles(w, h).reshape(-1)
    flat = env.reshape(-1, 3)
    # cos matrix by explicit outer products: deterministic, no BLAS reductions
    cos = (np.multiply.outer(dirs[:, 0], dirs[:, 0])
           + np.multiply.outer(dirs[:, 1], dirs[:, 1])
           + np.multiply.outer(dirs[:, 2], dirs[:, 2]))
    wgt = np.clip(cos, 0.0, None) ** exponent * omega[None, :]
    out = (wgt[:, :, None] * flat[None, :, :]).sum(axis=1) / wgt.sum(axis=1)[:, None]
    return out.reshape(h, w, 3)


def lobe_exponent(roughness: float) -> float:
    """Cosine-power exponent for a given roughness; inf at roughness 0."""
    if roughness <= 0.0:
        return np.inf
    return max(1.0, 2.0 / roughness**2 - 2.0)


@dataclass
class PrefilteredEnvMap:
    """Mip stack over a fixed roughness grid r_k = k / (levels - 1)."""

    levels: list  # list[np.ndarray], level 0 == source

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def sample(self, dirs: np.ndarray, roughness) -> np.ndarray:
        """Lookup with linear interpolation across the roughness grid."""
        n = self.num_levels
        if n == 1:
            return sample_latlong(self.levels[0], dirs)
        level_f = np.clip(np.asarray(roughness, dtype=np.float64), 0.0, 1.0) * (n - 1)
        l0 = np.floor(level_f).astype(np.int64)
        l1 = np.minimum(l0 + 1, n - 1)
        t = level_f - l0
        per_level = np.stack([sample_latlong(lv, dirs) for lv in self.levels])
        lo = np.take_along_axis(per_level, l0[None, ..., None], axis=0)[0]
        hi = np.take_along_axis(per_level, l1[None, ..., None], axis=0)[0]
        return lo * (1 - t)[..., None] + hi * t[..., None]


def prefilter_env(env: np.ndarray, levels: int) -> PrefilteredEnvMap:
    """Build the prefiltered stack; level 0 is the source map unchanged."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    env = np.asarray(env, dtype=np.float64)
    stack = [env.copy()]
    for k in range(1, levels):
        r_k = k / (levels - 1)
        stack.append(_convolve_cosine_power(env, lobe_exponent(r_k)))
    return PrefilteredEnvMap(levels=stack)


def env_total_energy(env: np.ndarray) -> np.ndarray:
    """Solid-angle weighted energy integral, for the conservation check."""
    h, w = env.shape[:2]
    omega = latlong_solid_angles(w, h)
    return (env * omega[:, :, None]).sum(axis=(0, 1))
