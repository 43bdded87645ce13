"""Procedural scenes: materials, primitives with rigid+scale transforms, cameras."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ROUGHNESS_FLOOR = 0.02


@dataclass(frozen=True)
class Material:
    """PBR material: linear-RGB albedo, GGX roughness, metallic.

    specular scales the whole specular lobe; 0 gives a pure Lambertian
    surface (used by analytic fixtures), 1 the standard dielectric/metal lobe.
    """
    albedo: tuple[float, float, float]
    roughness: float = 0.5
    metallic: float = 0.0
    specular: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.albedo, dtype=float)
        if a.shape != (3,) or np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError(f"albedo must be 3 channels in [0,1], got {self.albedo}")
        if not ROUGHNESS_FLOOR <= self.roughness <= 1.0:
            raise ValueError(f"roughness {self.roughness} outside [{ROUGHNESS_FLOOR}, 1]")
        if not 0.0 <= self.metallic <= 1.0:
            raise ValueError(f"metallic {self.metallic} outside [0, 1]")
        if not 0.0 <= self.specular <= 1.0:
            raise ValueError(f"specular {self.specular} outside [0, 1]")

    def to_json(self):
        return {"albedo": list(self.albedo), "roughness": self.roughness,
                "metallic": self.metallic, "specular": self.specular}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["albedo"]), obj["roughness"], obj["metallic"],
                   obj.get("specular", 1.0))


def rotation_from_quat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    c, s = math.cos(angle), math.sin(angle)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + s * k + (1 - c) * (k @ k)


@dataclass(frozen=True)
class Primitive:
    """A unit shape under translation + rotation + per-axis scale.

    Local canonical shapes: sphere of radius 1, box [-0.5, 0.5]^3, plane quad
    z=0, |x|<=0.5, |y|<=0.5.
    """
    shape: str                               # "sphere" | "box" | "plane"
    material: Material
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple = ((1, 0, 0), (0, 1, 0), (0, 0, 1))   # 3x3 rows
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.shape not in ("sphere", "box", "plane"):
            raise ValueError(f"unknown primitive shape {self.shape!r}")
        if any(s <= 0.0 for s in self.scale):
            raise ValueError(f"scale must be positive, got {self.scale}")

    def rot(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)

    def to_json(self):
        return {"shape": self.shape, "material": self.material.to_json(),
                "position": list(self.position),
                "rotation": [list(r) for r in self.rotation],
                "scale": list(self.scale)}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["shape"], Material.from_json(obj["material"]),
                   tuple(obj["position"]),
                   tuple(tuple(r) for r in obj["rotation"]),
                   tuple(obj["scale"]))


@dataclass(frozen=True)
class SceneSpec:
    primitives: tuple
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.primitives) < 1:
            raise ValueError("a scene needs at least one primitive")

    def to_json(self):
        return {"primitives": [p.to_json() for p in self.primitives],
                "background": list(self.background)}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(Primitive.from_json(p) for p in obj["primitives"]),
                   tuple(obj["background"]))


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    vfov: float = math.radians(45.0)
    width: int = 128
    height: int = 128

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        tgt = np.asarray(self.look_at, dtype=float)
        fwd = tgt - pos
        n = np.linalg.norm(fwd)
        if n <= 0.0:
            raise ValueError("camera position and look_at coincide")
        up = np.asarray(self.up, dtype=float)
        un = np.linalg.norm(up)
        if un <= 0.0:
            raise ValueError("up vector must be nonzero")
        if np.linalg.norm(np.cross(fwd / n, up / un)) < 1e-9:
            raise ValueError("up vector is parallel to the view axis")
        if not 0.0 < self.vfov < math.pi:
            raise ValueError(f"vfov {self.vfov} outside (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image must have positive size")

    def basis(self) -> np.ndarray:
        """Camera-to-world rotation; camera space is x-right, y-up, looking down -z."""
        pos = np.asarray(self.position, dtype=float)
        fwd = np.asarray(self.look_at, dtype=float) - pos
        fwd = fwd / np.linalg.norm(fwd)
        up = np.asarray(self.up, dtype=float)
        right = np.cross(fwd, up)
        right = right / np.linalg.norm(right)
        cam_up = np.cross(right, fwd)
        return np.stack([right, cam_up, -fwd], axis=1)

    def to_json(self):
        return {"position": list(self.position), "look_at": list(self.look_at),
                "up": list(self.up), "vfov_rad": self.vfov,
                "width": self.width, "height": self.height}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["position"]), tuple(obj["look_at"]), tuple(obj["up"]),
                   obj["vfov_rad"], obj["width"], obj["height"])


# ---------------------------------------------------------------------------
# Procedural object sampling.  The seed fully determines geometry + materials.
# ---------------------------------------------------------------------------

GROUND_MATERIAL = Material((0.55, 0.55, 0.55), roughness=0.8, metallic=0.0)


def sample_object_scene(seed: int, max_primitives: int = 4,
                        include_ground: bool = True) -> SceneSpec:
    """Random composition of 1..max_primitives spheres/boxes, optional ground quad."""
    rng = np.random.default_rng([101, int(seed)])
    n = int(rng.integers(1, max_primitives + 1))
    prims = []
    for _ in range(n):
        shape = "sphere" if rng.random() < 0.5 else "box"
        s = rng.uniform(0.18, 0.45, size=3)
        if shape == "sphere" and rng.random() < 0.6:
            s[:] = s[0]                      # mostly true spheres
        center = np.array([rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45),
                           rng.uniform(0.25, 0.85)])
        q = rng.normal(size=4)
        metallic = 1.0 if rng.random() < 0.25 else 0.0
        mat = Material(tuple(np.round(rng.uniform(0.08, 0.92, size=3), 6)),
                       roughness=float(np.round(rng.uniform(0.08, 0.95), 6)),
                       metallic=metallic)
        prims.append(Primitive(shape, mat, tuple(center),
                               tuple(tuple(r) for r in rotation_from_quat(q)),
                               tuple(s)))
    if include_ground:
        prims.append(Primitive("plane", GROUND_MATERIAL, (0.0, 0.0, 0.0),
                               scale=(6.0, 6.0, 1.0)))
    bg = tuple(np.round(rng.uniform(0.0, 0.02, size=3), 6))
    return SceneSpec(tuple(prims), bg)


def single_primitive_scene(seed: int) -> SceneSpec:
    """One floating convex primitive, no ground; used by relight-oracle checks."""
    rng = np.random.default_rng([102, int(seed)])
    shape = "sphere" if rng.random() < 0.5 else "box"
    s = rng.uniform(0.3, 0.6, size=3)
    if shape == "sphere":
        s[:] = s[0]
    q = rng.normal(size=4)
    mat = Material(tuple(rng.uniform(0.1, 0.9, size=3)),
                   roughness=float(rng.uniform(0.1, 0.9)),
                   metallic=1.0 if rng.random() < 0.3 else 0.0)
    prim = Primitive(shape, mat, (0.0, 0.0, 0.5),
                     tuple(tuple(r) for r in rotation_from_quat(q)), tuple(s))
    return SceneSpec((prim,), (0.0, 0.0, 0.0))
