"""Desk-scale multi-illumination dataset builder.

Samples procedural objects, hemisphere cameras and perturbed lights, renders
every (object, view, light) combination and writes a self-contained JSON-lines
manifest: any record can be re-rendered bit-exactly from its metadata alone.
A deterministic hash selects the sparse PBR-supervised subset and a held-out
eval split; relighting pairs are drawn within each (object, view) group with
their exact illumination difference attached.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .imgio import json_compact, load_raw, save_raw
from .lights import DeltaL, LightParams, delta_illumination
from .render import GBuffer, render
from .scene import CameraPose, SceneSpec, sample_object_scene

MANIFEST_SCHEMA = "scalight-mini/1"

GBUFFER_FIELDS = ("albedo", "normal", "roughness", "metallic", "depth", "coverage")


@dataclass
class SampleRecord:
    object_id: str
    view_id: int
    light_id: int
    object_seed: int
    scene: SceneSpec
    camera: CameraPose
    light: LightParams
    image_path: str
    gbuffer_paths: dict = field(default_factory=dict)
    has_pbr_supervision: bool = False
    split: str = "train"

    def key(self):
        return (self.object_id, self.view_id, self.light_id)

    def to_json(self) -> dict:
        return {"schema": MANIFEST_SCHEMA, "type": "sample",
                "object_id": self.object_id, "view_id": self.view_id,
                "light_id": self.light_id, "object_seed": self.object_seed,
                "scene": self.scene.to_json(),
                "camera": self.camera.to_json(), "light": self.light.to_json(),
                "image_path": self.image_path, "gbuffer_paths": self.gbuffer_paths,
                "has_pbr_supervision": self.has_pbr_supervision, "split": self.split}

    @classmethod
    def from_json(cls, obj: dict) -> "SampleRecord":
        return cls(obj["object_id"], obj["view_id"], obj["light_id"],
                   obj["object_seed"], SceneSpec.from_json(obj["scene"]),
                   CameraPose.from_json(obj["camera"]),
                   LightParams.from_json(obj["light"]), obj["image_path"],
                   dict(obj["gbuffer_paths"]), obj["has_pbr_supervision"],
                   obj.get("split", "train"))


@dataclass
class PairRecord:
    source: tuple      # (object_id, view_id, light_id)
    target: tuple
    delta: DeltaL
    variation: str     # temperature | position | energy | mixed
    mask_path: str | None = None

    def to_json(self) -> dict:
        obj = {"schema": MANIFEST_SCHEMA, "type": "pair",
               "source": list(self.source), "target": list(self.target),
               "delta": self.delta.to_json(), "variation": self.variation}
        if self.mask_path is not None:
            obj["mask_path"] = self.mask_path
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "PairRecord":
        return cls(tuple(obj["source"]), tuple(obj["target"]),
                   DeltaL.from_json(obj["delta"]), obj["variation"],
                   obj.get("mask_path"))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_camera_hemisphere(seed: int, radius_range=(2.5, 4.0),
                             target=(0.0, 0.0, 0.3), width: int = 128,
                             height: int = 128) -> CameraPose:
    """Uniform position on the upper hemisphere around the target."""
    lo, hi = radius_range
    if lo <= 0.0 or hi < lo:
        raise ValueError(f"invalid radius range {radius_range}")
    rng = np.random.default_rng([401, int(seed)])
    z = rng.uniform(0.05, 0.98)       # stay off the pole so `up` is never parallel
    az = rng.uniform(0.0, 2.0 * math.pi)
    r = rng.uniform(lo, hi)
    s = math.sqrt(1.0 - z * z)
    d = np.array([s * math.cos(az), s * math.sin(az), z])
    pos = np.asarray(target, dtype=float) + r * d
    return CameraPose(tuple(pos), tuple(target), (0.0, 0.0, 1.0),
                      math.radians(45.0), width, height)


@dataclass
class VariationRanges:
    """Half-widths of the perturbations applied to a base light."""
    dyaw: float = math.radians(100.0)
    dpitch: float = math.radians(20.0)
    dlog_e: float = math.log(2.5)
    dtemp_k: float = 3000.0
    kinds: tuple = ("position", "energy", "temperature")

    def validate(self, base: LightParams) -> None:
        for k in self.kinds:
            if k not in ("position", "energy", "temperature", "mixed"):
                raise ValueError(f"unknown variation kind {k!r}")
        margin = math.radians(2.0)
        if {"position", "mixed"} & set(self.kinds):
            if not (margin < base.pitch - self.dpitch
                    and base.pitch + self.dpitch < math.pi - margin):
                raise ValueError(
                    f"pitch range +-{self.dpitch} around {base.pitch} leaves (0, pi)")
        if {"temperature", "mixed"} & set(self.kinds):
            from .lights import TEMP_MAX_K, TEMP_MIN_K
            if (base.temperature_k - self.dtemp_k < TEMP_MIN_K
                    or base.temperature_k + self.dtemp_k > TEMP_MAX_K):
                raise ValueError(
                    f"temperature range +-{self.dtemp_k} around {base.temperature_k} "
                    "leaves [1000, 12000]")


def _perturb(rng, half_width: float, min_frac: float = 0.08) -> float:
    """Nonzero symmetric perturbation: magnitude in [min_frac, 1] * half_width."""
    mag = rng.uniform(min_frac, 1.0) * half_width
    return float(mag if rng.random() < 0.5 else -mag)


def sample_light_variations(base: LightParams, ranges: VariationRanges, n: int,
                            seed: int):
    """n perturbed copies of the base light, each labeled with its variation kind."""
    if n < 1:
        raise ValueError("need at least one variation")
    ranges.validate(base)
    rng = np.random.default_rng([402, int(seed)])
    out = []
    for i in range(n):
        kind = ranges.kinds[i % len(ranges.kinds)]
        dyaw = dpitch = dlog_e = dtemp = 0.0
        if kind in ("position", "mixed"):
            dyaw = _perturb(rng, ranges.dyaw)
            dpitch = _perturb(rng, ranges.dpitch)
        if kind in ("energy", "mixed"):
            dlog_e = _perturb(rng, ranges.dlog_e)
        if kind in ("temperature", "mixed"):
            dtemp = _perturb(rng, ranges.dtemp_k)
        position = None
        yaw, pitch = base.yaw + dyaw, base.pitch + dpitch
        if base.kind == "point":
            from .lights import yaw_pitch_to_direction
            position = tuple(base.radius() * yaw_pitch_to_direction(yaw, pitch))
        light = LightParams(base.kind, yaw, pitch,
                            base.energy_lux * math.exp(dlog_e),
                            base.temperature_k + dtemp, position)
        out.append((light, kind))
    return out


def classify_variation(a: LightParams, b: LightParams) -> str | None:
    """Label a lighting pair by which attributes differ; None if identical."""
    pos = a.yaw != b.yaw or a.pitch != b.pitch
    energy = a.energy_lux != b.energy_lux
    temp = a.temperature_k != b.temperature_k
    differing = [name for name, changed in
                 (("position", pos), ("energy", energy), ("temperature", temp))
                 if changed]
    if not differing:
        return None
    return differing[0] if len(differing) == 1 else "mixed"


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

@dataclass
class DatasetConfig:
    seed: int = 0
    objects: int = 16
    views_per_object: int = 4
    lights_per_view: int = 8
    width: int = 128
    height: int = 128
    supervised_fraction: float = 0.03
    eval_fraction: float = 0.1
    radius_range: tuple = (2.5, 4.0)
    target: tuple = (0.0, 0.0, 0.3)
    include_ground: bool = True
    max_primitives: int = 4
    base_energy_lux: float = 1000.0
    base_temperature_k: float = 5500.0
    ranges: VariationRanges = field(default_factory=VariationRanges)

    def __post_init__(self):
        if self.objects < 1 or self.views_per_object < 1 or self.lights_per_view < 1:
            raise ValueError("objects, views and lights must all be >= 1")
        if not 0.0 <= self.supervised_fraction <= 1.0:
            raise ValueError(f"supervised fraction {self.supervised_fraction} outside [0,1]")
        if not 0.0 <= self.eval_fraction <= 1.0:
            raise ValueError(f"eval fraction {self.eval_fraction} outside [0,1]")


def _record_hash(*parts) -> str:
    return hashlib.sha256("|".join(str(p) for p in parts).encode()).hexdigest()


def _base_light(cfg: DatasetConfig, seed_parts) -> LightParams:
    rng = np.random.default_rng([403] + list(seed_parts))
    return LightParams.directional(rng.uniform(0.0, 2.0 * math.pi),
                                   rng.uniform(math.radians(30.0), math.radians(65.0)),
                                   cfg.base_energy_lux, cfg.base_temperature_k)


def plan_records(cfg: DatasetConfig):
    """All SampleRecords (paths set, nothing rendered) in deterministic key order."""
    records = []
    for oi in range(cfg.objects):
        object_id = f"obj{oi:03d}"
        object_seed = cfg.seed * 100003 + oi
        scene = sample_object_scene(object_seed, cfg.max_primitives, cfg.include_ground)
        for vi in range(cfg.views_per_object):
            cam = sample_camera_hemisphere(cfg.seed * 7919 + oi * 131 + vi,
                                           cfg.radius_range, cfg.target,
                                           cfg.width, cfg.height)
            base = _base_light(cfg, (cfg.seed, oi, vi))
            lights = [(base, "base")]
            if cfg.lights_per_view > 1:
                lights += sample_light_variations(base, cfg.ranges,
                                                  cfg.lights_per_view - 1,
                                                  cfg.seed * 31 + oi * 17 + vi)
            for li, (light, _kind) in enumerate(lights):
                rel = os.path.join(object_id, f"v{vi}_l{li}")
                records.append(SampleRecord(
                    object_id, vi, li, object_seed, scene, cam, light,
                    image_path=rel + ".raw"))
    # sparse supervision: floor of the fraction, ordered by object-id hash
    n_sup = int(math.floor(cfg.supervised_fraction * len(records)))
    order = sorted(range(len(records)),
                   key=lambda i: (_record_hash(records[i].object_id),
                                  records[i].view_id, records[i].light_id))
    for i in order[:n_sup]:
        records[i].has_pbr_supervision = True
    n_eval = int(math.floor(cfg.eval_fraction * len(records)))
    eval_order = sorted(range(len(records)),
                        key=lambda i: _record_hash("eval", *records[i].key()))
    for i in eval_order[:n_eval]:
        records[i].split = "eval"
    return records


def scene_for_record(rec: SampleRecord) -> SceneSpec:
    return rec.scene


def save_gbuffer(g: GBuffer, root, prefix) -> dict:
    paths = {}
    os.makedirs(os.path.dirname(os.path.join(root, prefix + "_albedo.raw")), exist_ok=True)
    for name in GBUFFER_FIELDS:
        rel = f"{prefix}_{name}.raw"
        data = getattr(g, name)
        if name == "coverage":
            save_raw(os.path.join(root, rel), data, dtype="u8")
        else:
            save_raw(os.path.join(root, rel), data)
        paths[name] = rel
    return paths


def load_gbuffer(root, paths: dict) -> GBuffer:
    vals = {name: load_raw(os.path.join(root, paths[name])) for name in GBUFFER_FIELDS}
    return GBuffer(**vals)


def generate_dataset(cfg: DatasetConfig, out_root) -> str:
    """Render all combinations and write the manifest; idempotent per seed.

    Coverage masks are stored for every record (mask extraction and encoding
    need the foreground everywhere); the float G-buffer planes only for the
    supervised subset and the eval split.
    """
    os.makedirs(out_root, exist_ok=True)
    records = plan_records(cfg)
    for rec in records:
        try:
            img, gbuf = render(rec.scene, rec.camera, rec.light)
        except Exception as e:
            raise RuntimeError(f"rendering failed for record {rec.key()}: {e}") from e
        path = os.path.join(out_root, rec.image_path)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        save_raw(path, img)
        prefix = rec.image_path[:-len(".raw")]
        if rec.has_pbr_supervision or rec.split == "eval":
            rec.gbuffer_paths = save_gbuffer(gbuf, out_root, prefix)
        else:
            rel = prefix + "_coverage.raw"
            save_raw(os.path.join(out_root, rel), gbuf.coverage, dtype="u8")
            rec.gbuffer_paths = {"coverage": rel}
    manifest_path = os.path.join(out_root, "manifest.jsonl")
    with open(manifest_path, "w", encoding="ascii") as f:
        for rec in records:
            f.write(json_compact(rec.to_json()) + "\n")
    return manifest_path


def read_manifest(path):
    """(samples, pairs) from a JSON-lines manifest or pair file."""
    samples, pairs = [], []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("schema") != MANIFEST_SCHEMA:
                raise ValueError(f"unknown manifest schema {obj.get('schema')!r}")
            if obj["type"] == "sample":
                samples.append(SampleRecord.from_json(obj))
            else:
                pairs.append(PairRecord.from_json(obj))
    return samples, pairs


def write_pairs(pairs, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        for p in pairs:
            f.write(json_compact(p.to_json()) + "\n")


def sample_pairs(samples, per_view: int = 2, seed: int = 0):
    """Relighting pairs within each (object, view) group.

    Returns (pairs, skipped_group_count); groups with fewer than two distinct
    lights are skipped and counted.
    """
    groups: dict = {}
    for rec in samples:
        groups.setdefault((rec.object_id, rec.view_id), []).append(rec)
    pairs = []
    skipped = 0
    for key in sorted(groups):
        group = sorted(groups[key], key=lambda r: r.light_id)
        candidates = []
        for src in group:
            for tgt in group:
                if src.light_id == tgt.light_id:
                    continue
                variation = classify_variation(src.light, tgt.light)
                if variation is None:
                    continue
                candidates.append((src, tgt, variation))
        if not candidates:
            skipped += 1
            continue
        rng = np.random.default_rng([404, seed, hash_key(key)])
        take = min(per_view, len(candidates))
        idx = rng.choice(len(candidates), size=take, replace=False)
        for i in sorted(idx):
            src, tgt, variation = candidates[i]
            pairs.append(PairRecord(src.key(), tgt.key(),
                                    delta_illumination(src.light, tgt.light),
                                    variation))
    return pairs, skipped


def hash_key(key) -> int:
    return int.from_bytes(hashlib.sha256(str(key).encode()).digest()[:4], "big")


def load_image(root, rec: SampleRecord) -> np.ndarray:
    return load_raw(os.path.join(root, rec.image_path))


def rerender_record(rec: SampleRecord):
    """Reproduce a record's image and G-buffer from manifest metadata alone."""
    return render(rec.scene, rec.camera, rec.light)
