"""Deterministic physically based micro-renderer.

Primary rays only, GGX/Smith/Schlick shading, optional hard shadows.  The
renderer doubles as the correctness oracle for the relighting operator, so
shading runs on flattened foreground arrays in a fixed order; re-shading the
same G-buffer with the same light reproduces the image bit for bit.

Units: energies in lux with E_REF = 1000 lux mapping to unit irradiance;
point lights add inverse-square falloff over distance in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lights import LightParams, temperature_to_rgb
from .scene import CameraPose, Material, Primitive, SceneSpec

E_REF_LUX = 1000.0
SHADOW_EPS = 1e-4       # shadow-ray offset along the light direction, meters
T_MIN = 1e-9


@dataclass
class GBuffer:
    """Per-pixel intrinsics: 8 material/geometry channels + depth + coverage.

    Normals are camera-space unit vectors on coverage; depth is the Euclidean
    ray distance in meters (inf on background).
    """
    albedo: np.ndarray      # H x W x 3
    normal: np.ndarray      # H x W x 3, camera space
    roughness: np.ndarray   # H x W
    metallic: np.ndarray    # H x W
    depth: np.ndarray       # H x W
    coverage: np.ndarray    # H x W, {0.0, 1.0}


# ---------------------------------------------------------------------------
# Rays and intersections
# ---------------------------------------------------------------------------

def camera_rays(cam: CameraPose):
    """Primary rays: origin, unit world dirs, unit camera dirs, camera basis."""
    w, h = cam.width, cam.height
    tan = math.tan(cam.vfov / 2.0)
    aspect = w / h
    xs = (2.0 * (np.arange(w) + 0.5) / w - 1.0) * tan * aspect
    ys = (1.0 - 2.0 * (np.arange(h) + 0.5) / h) * tan
    d_cam = np.empty((h, w, 3))
    d_cam[:, :, 0] = xs[None, :]
    d_cam[:, :, 1] = ys[:, None]
    d_cam[:, :, 2] = -1.0
    d_cam /= np.linalg.norm(d_cam, axis=2, keepdims=True)
    basis = cam.basis()
    d_world = d_cam @ basis.T
    return np.asarray(cam.position, dtype=float), d_world, d_cam, basis


def _intersect_primitive(prim: Primitive, origins: np.ndarray, dirs: np.ndarray):
    """Nearest hit parameter per ray (inf = miss); t measures world distance
    when dirs are unit length."""
    rot = prim.rot()
    inv_s = 1.0 / np.asarray(prim.scale, dtype=float)
    o = ((origins - np.asarray(prim.position, dtype=float)) @ rot) * inv_s
    d = (dirs @ rot) * inv_s
    n = dirs.shape[0]
    t = np.full(n, np.inf)
    if prim.shape == "sphere":
        a = np.einsum("ij,ij->i", d, d)
        b = 2.0 * np.einsum("ij,ij->i", o, d)
        c = np.einsum("ij,ij->i", o, o) - 1.0
        disc = b * b - 4.0 * a * c
        hit = disc >= 0.0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0 = (-b - sq) / (2.0 * a)
        t1 = (-b + sq) / (2.0 * a)
        cand = np.where(t0 > T_MIN, t0, np.where(t1 > T_MIN, t1, np.inf))
        t = np.where(hit, cand, np.inf)
    elif prim.shape == "box":
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_d = 1.0 / d
            t_lo = (-0.5 - o) * inv_d
            t_hi = (0.5 - o) * inv_d
        near = np.nanmin(np.stack([t_lo, t_hi]), axis=0)
        far = np.nanmax(np.stack([t_lo, t_hi]), axis=0)
        # rays parallel to a slab: inside iff |o| <= 0.5 on that axis
        par = np.abs(d) < 1e-12
        near = np.where(par, -np.inf, near)
        far = np.where(par, np.where(np.abs(o) <= 0.5, np.inf, -np.inf), far)
        t_enter = near.max(axis=1)
        t_exit = far.min(axis=1)
        hit = (t_exit >= t_enter) & (t_exit > T_MIN)
        cand = np.where(t_enter > T_MIN, t_enter, t_exit)
        t = np.where(hit, cand, np.inf)
    else:  # plane quad, local z = 0
        dz = d[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            tp = -o[:, 2] / dz
        px = o[:, 0] + tp * d[:, 0]
        py = o[:, 1] + tp * d[:, 1]
        hit = (np.abs(dz) > 1e-12) & (tp > T_MIN) & (np.abs(px) <= 0.5) & (np.abs(py) <= 0.5)
        t = np.where(hit, tp, np.inf)
    return t


def _local_normal(prim: Primitive, p_local: np.ndarray) -> np.ndarray:
    if prim.shape == "sphere":
        return p_local
    if prim.shape == "box":
        ax = np.argmax(np.abs(p_local), axis=1)
        n = np.zeros_like(p_local)
        n[np.arange(len(ax)), ax] = np.sign(p_local[np.arange(len(ax)), ax])
        return n
    n = np.zeros_like(p_local)
    n[:, 2] = 1.0
    return n


def trace(scene: SceneSpec, origins: np.ndarray, dirs: np.ndarray):
    """Closest-hit over all primitives: (t, primitive index), inf/-1 on miss."""
    flat_o = origins if origins.ndim == 2 else np.broadcast_to(origins, dirs.shape)
    t_best = np.full(dirs.shape[0], np.inf)
    idx = np.full(dirs.shape[0], -1, dtype=int)
    for i, prim in enumerate(scene.primitives):
        t = _intersect_primitive(prim, flat_o, dirs)
        closer = t < t_best
        t_best = np.where(closer, t, t_best)
        idx = np.where(closer, i, idx)
    return t_best, idx


def world_normals(scene: SceneSpec, idx: np.ndarray, points: np.ndarray,
                  view_dirs: np.ndarray) -> np.ndarray:
    """Outward unit normals at hit points, flipped toward the viewer."""
    n = np.zeros_like(points)
    for i, prim in enumerate(scene.primitives):
        sel = idx == i
        if not np.any(sel):
            continue
        rot = prim.rot()
        inv_s = 1.0 / np.asarray(prim.scale, dtype=float)
        p_local = ((points[sel] - np.asarray(prim.position, dtype=float)) @ rot) * inv_s
        n_local = _local_normal(prim, p_local)
        n_world = (n_local * inv_s) @ rot.T
        n_world /= np.linalg.norm(n_world, axis=1, keepdims=True)
        n[sel] = n_world
    facing = np.einsum("ij,ij->i", n, -view_dirs)
    n[facing < 0.0] *= -1.0
    return n


# ---------------------------------------------------------------------------
# Shading
# ---------------------------------------------------------------------------

def shade_arrays(albedo, roughness, metallic, specular, n, v, l, irradiance):
    """GGX microfacet + Lambert, all inputs flattened (N, ...) arrays.

    out = (diffuse + specular_lobe) * irradiance * max(0, n.l)
    diffuse = (1 - metallic) * albedo / pi
    specular_lobe = specular * D_GGX * V_SmithHeightCorrelated * F_Schlick
    """
    ndl = np.clip(np.einsum("ij,ij->i", n, l), 0.0, None)
    ndv = np.clip(np.einsum("ij,ij->i", n, v), 1e-9, None)
    h = v + l
    hn = np.linalg.norm(h, axis=1, keepdims=True)
    h = np.where(hn > 1e-12, h / np.where(hn > 1e-12, hn, 1.0), n)
    ndh = np.clip(np.einsum("ij,ij->i", n, h), 0.0, 1.0)
    vdh = np.clip(np.einsum("ij,ij->i", v, h), 0.0, 1.0)

    alpha = roughness * roughness
    a2 = alpha * alpha
    denom = ndh * ndh * (a2 - 1.0) + 1.0
    d_ggx = a2 / (math.pi * denom * denom)
    vis_den = (ndl * np.sqrt(ndv * ndv * (1.0 - a2) + a2)
               + ndv * np.sqrt(ndl * ndl * (1.0 - a2) + a2))
    v_smith = 0.5 / np.maximum(vis_den, 1e-9)
    f0 = 0.04 * (1.0 - metallic[:, None]) + albedo * metallic[:, None]
    fresnel = f0 + (1.0 - f0) * (1.0 - vdh[:, None]) ** 5

    spec = specular[:, None] * (d_ggx * v_smith)[:, None] * fresnel
    diffuse = (1.0 - metallic[:, None]) * albedo / math.pi
    irr = np.broadcast_to(np.asarray(irradiance, dtype=float), albedo.shape)
    return (diffuse + spec) * irr * ndl[:, None]


def shade_pixel(mat: Material, n, v, l, irradiance) -> np.ndarray:
    """Single-sample wrapper around shade_arrays."""
    out = shade_arrays(
        np.asarray(mat.albedo, dtype=float)[None, :],
        np.array([mat.roughness]), np.array([mat.metallic]),
        np.array([mat.specular]),
        np.asarray(n, dtype=float)[None, :], np.asarray(v, dtype=float)[None, :],
        np.asarray(l, dtype=float)[None, :],
        np.asarray(irradiance, dtype=float)[None, :])
    return out[0]


def light_sample(light: LightParams, points_world: np.ndarray | None):
    """Per-point light direction (world), distance (or None), irradiance RGB."""
    color = temperature_to_rgb(light.temperature_k)
    scale = light.energy_lux / E_REF_LUX
    if light.kind == "directional":
        return light.direction(), None, color * scale
    if points_world is None:
        raise ValueError("point-light shading requires surface positions")
    lp = np.asarray(light.position, dtype=float)
    delta = lp[None, :] - points_world
    dist = np.linalg.norm(delta, axis=1)
    l = delta / dist[:, None]
    irr = (color[None, :] * scale) / (dist * dist)[:, None]
    return l, dist, irr


def visibility(scene: SceneSpec, p: np.ndarray, light: LightParams) -> int:
    """1 iff the shadow ray from p toward the light reaches it unobstructed."""
    return int(visibility_many(scene, np.asarray(p, dtype=float)[None, :], light)[0])


def visibility_many(scene: SceneSpec, points: np.ndarray, light: LightParams) -> np.ndarray:
    if light.kind == "directional":
        l = np.broadcast_to(light.direction(), points.shape)
        max_t = np.full(points.shape[0], np.inf)
    else:
        lp = np.asarray(light.position, dtype=float)
        delta = lp[None, :] - points
        dist = np.linalg.norm(delta, axis=1)
        l = delta / dist[:, None]
        max_t = dist - SHADOW_EPS
    origins = points + SHADOW_EPS * l
    t, _ = trace(scene, origins, np.ascontiguousarray(l))
    return (t >= max_t).astype(float)


# ---------------------------------------------------------------------------
# Full render
# ---------------------------------------------------------------------------

def render(scene: SceneSpec, cam: CameraPose, light: LightParams,
           shadows: bool = True):
    """Render a linear-radiance image and its G-buffer.

    Deterministic for fixed inputs; background pixels carry the scene
    background radiance with coverage 0 and infinite depth.
    """
    if cam.width < 1 or cam.height < 1:
        raise ValueError("image must have positive size")
    h, w = cam.height, cam.width
    origin, d_world, d_cam, basis = camera_rays(cam)
    dw = d_world.reshape(-1, 3)
    t, idx = trace(scene, origin[None, :], dw)
    cov = np.isfinite(t)

    image = np.empty((h * w, 3))
    image[:] = np.asarray(scene.background, dtype=float)
    gb = GBuffer(
        albedo=np.zeros((h, w, 3)), normal=np.zeros((h, w, 3)),
        roughness=np.zeros((h, w)), metallic=np.zeros((h, w)),
        depth=np.full((h, w), np.inf),
        coverage=cov.reshape(h, w).astype(float),
    )
    if np.any(cov):
        tf = t[cov]
        dwf = dw[cov]
        dcf = d_cam.reshape(-1, 3)[cov]
        p_world = origin[None, :] + tf[:, None] * dwf
        n_world = world_normals(scene, idx[cov], p_world, dwf)
        n_cam = n_world @ basis

        mats = [p.material for p in scene.primitives]
        alb = np.array([m.albedo for m in mats])[idx[cov]]
        rough = np.array([m.roughness for m in mats])[idx[cov]]
        metal = np.array([m.metallic for m in mats])[idx[cov]]
        spec = np.array([m.specular for m in mats])[idx[cov]]

        p_cam = tf[:, None] * dcf
        l_cam, dist, irr = _light_in_camera(light, basis, origin, p_cam)
        v_cam = -dcf
        radiance = shade_arrays(alb, rough, metal, spec, n_cam, v_cam, l_cam, irr)
        if shadows:
            radiance = radiance * visibility_many(scene, p_world, light)[:, None]
        image[cov] = radiance

        flat = cov.reshape(h, w)
        gb.albedo[flat] = alb
        gb.normal[flat] = n_cam
        gb.roughness[flat] = rough
        gb.metallic[flat] = metal
        gb.depth[flat] = tf
    return image.reshape(h, w, 3), gb


def _light_in_camera(light: LightParams, basis: np.ndarray, cam_pos: np.ndarray,
                     p_cam: np.ndarray):
    """Light direction/irradiance for camera-space surface points p_cam."""
    if light.kind == "directional":
        l_cam = light.direction() @ basis
        color = temperature_to_rgb(light.temperature_k)
        irr = color * (light.energy_lux / E_REF_LUX)
        return np.broadcast_to(l_cam, p_cam.shape), None, irr
    lp_cam = (np.asarray(light.position, dtype=float) - cam_pos) @ basis
    delta = lp_cam[None, :] - p_cam
    dist = np.linalg.norm(delta, axis=1)
    l_cam = delta / dist[:, None]
    color = temperature_to_rgb(light.temperature_k)
    irr = (color[None, :] * (light.energy_lux / E_REF_LUX)) / (dist * dist)[:, None]
    return l_cam, dist, irr
