"""HTTP service backing the interactive lighting explorer.

Scenes are re-rendered from the manifest into immutable float64 snapshots at
startup, so a zero edit reproduces the stored preview byte for byte.  Edits
arrive in human units (degrees, kelvin, energy factor), are validated against
the physical parameter ranges, converted to the 11-dim relative-illumination
vector server-side and echoed back with every response.
"""

from __future__ import annotations

import base64
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

try:
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, Response
    from pydantic import BaseModel, ConfigDict
    HAVE_FASTAPI = True
except ModuleNotFoundError:          # the math stack works without the service
    HAVE_FASTAPI = False

from .config import PipelineConfig
from .dataset import read_manifest
from .imgio import encode_gray_png, encode_srgb_png
from .lights import (TEMP_MAX_K, TEMP_MIN_K, DeltaL, apply_delta,
                     delta_from_edit)
from .mask import MaskPredictorParams, gt_mask, mask_features, predict_mask
from .metrics import normalize_pm1, psnr, rmse, ssim
from .relight import RelightRequest, relight
from .render import render

EDIT_LIMITS = {"dyaw_deg": 180.0, "dpitch_deg": 80.0, "dtemp_k": 5000.0}
ENERGY_FACTOR_RANGE = (0.1, 10.0)
PITCH_MARGIN_RAD = math.radians(1.0)


@dataclass
class SceneSnapshot:
    scene_id: str
    record: object
    image: np.ndarray        # float64 linear radiance
    gbuffer: object
    preview_png: bytes
    sibling_lights: list     # (light_id, LightParams) in the same (object, view)


class SceneStore:
    """Immutable relightable scenes plus the trained mask predictor, if any."""

    def __init__(self, snapshots, exposure: float,
                 mask_params: MaskPredictorParams | None = None):
        self.snapshots = {s.scene_id: s for s in snapshots}
        self.order = [s.scene_id for s in snapshots]
        self.exposure = exposure
        self.mask_params = mask_params

    @classmethod
    def from_manifest(cls, manifest_path, root, exposure: float = 1.0,
                      max_scenes: int = 16) -> "SceneStore":
        samples, _ = read_manifest(manifest_path)
        by_view = {}
        for rec in samples:
            by_view.setdefault((rec.object_id, rec.view_id), []).append(rec)
        snapshots = []
        for key in sorted(by_view):
            if len(snapshots) >= max_scenes:
                break
            group = sorted(by_view[key], key=lambda r: r.light_id)
            rec = group[0]
            img, gbuf = render(rec.scene, rec.camera, rec.light)
            sid = f"{rec.object_id}-v{rec.view_id}-l{rec.light_id}"
            snapshots.append(SceneSnapshot(
                sid, rec, img, gbuf, encode_srgb_png(img, exposure),
                [(r.light_id, r.light) for r in group]))
        params = None
        mask_path = os.path.join(root, "mask_params.json")
        if os.path.exists(mask_path):
            with open(mask_path, "r", encoding="ascii") as f:
                params = MaskPredictorParams.from_json(json.load(f))
        return cls(snapshots, exposure, params)

    def edit_bounds(self, snap: SceneSnapshot) -> dict:
        light = snap.record.light
        lo_pitch = math.degrees(PITCH_MARGIN_RAD - light.pitch)
        hi_pitch = math.degrees(math.pi - PITCH_MARGIN_RAD - light.pitch)
        return {
            "dyaw_deg": [-EDIT_LIMITS["dyaw_deg"], EDIT_LIMITS["dyaw_deg"]],
            "dpitch_deg": [max(-EDIT_LIMITS["dpitch_deg"], lo_pitch),
                           min(EDIT_LIMITS["dpitch_deg"], hi_pitch)],
            "denergy_factor": list(ENERGY_FACTOR_RANGE),
            "dtemp_k": [max(-EDIT_LIMITS["dtemp_k"], TEMP_MIN_K - light.temperature_k),
                        min(EDIT_LIMITS["dtemp_k"], TEMP_MAX_K - light.temperature_k)],
        }


class EditError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def _validate_edit(store: SceneStore, snap: SceneSnapshot, state: dict):
    def num(name, default=0.0):
        v = state.get(name, default)
        if v is None:
            return default
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise EditError(name, f"{name} must be a number")
        return float(v)

    dyaw = num("dyaw_deg")
    dpitch = num("dpitch_deg")
    dtemp = num("dtemp_k")
    for name, value in (("dyaw_deg", dyaw), ("dpitch_deg", dpitch), ("dtemp_k", dtemp)):
        lim = EDIT_LIMITS[name]
        if abs(value) > lim:
            raise EditError(name, f"{name}={value} outside [-{lim}, {lim}]")

    dlux_log = state.get("dlux_log")
    factor = state.get("denergy_factor")
    if dlux_log is not None and factor is not None:
        raise EditError("denergy_factor",
                        "give either dlux_log or denergy_factor, not both")
    if factor is not None:
        lo, hi = ENERGY_FACTOR_RANGE
        if not lo <= float(factor) <= hi:
            raise EditError("denergy_factor",
                            f"denergy_factor={factor} outside [{lo}, {hi}]")
        dlog_e = math.log(float(factor))
    elif dlux_log is not None:
        dlog_e = float(dlux_log)
        if abs(dlog_e) > math.log(ENERGY_FACTOR_RANGE[1]):
            raise EditError("dlux_log",
                            f"dlux_log={dlog_e} outside +-{math.log(ENERGY_FACTOR_RANGE[1])}")
    else:
        dlog_e = 0.0

    light = snap.record.light
    pitch_t = light.pitch + math.radians(dpitch)
    if not 0.0 < pitch_t < math.pi:
        raise EditError("dpitch_deg",
                        f"edit drives pitch to {pitch_t} rad, outside (0, pi)")
    temp_t = light.temperature_k + dtemp
    if not TEMP_MIN_K <= temp_t <= TEMP_MAX_K:
        raise EditError("dtemp_k",
                        f"edit drives temperature to {temp_t} K, "
                        f"outside [{TEMP_MIN_K}, {TEMP_MAX_K}]")
    return math.radians(dyaw), math.radians(dpitch), dlog_e, dtemp / 10000.0


def render_edit(store: SceneStore, state: dict) -> dict:
    """Relight one scene per the edit state; shared by the service and the
    CLI history replay so both emit identical bytes."""
    scene_id = state.get("scene_id")
    if scene_id not in store.snapshots:
        raise KeyError(f"unknown scene {scene_id!r}")
    snap = store.snapshots[scene_id]
    dyaw, dpitch, dlog_e, dtau = _validate_edit(store, snap, state)
    t0 = time.perf_counter()
    rec = snap.record
    delta = delta_from_edit(rec.light, dyaw, dpitch, dlog_e, dtau)
    req = RelightRequest(snap.gbuffer, rec.light, delta, rec.camera,
                         mode="geometric", scene=rec.scene,
                         source_image=snap.image)
    relit = relight(req)
    png = encode_srgb_png(relit, store.exposure)
    out = {
        "png_base64": base64.b64encode(png).decode("ascii"),
        "delta_l": delta.to_json(),
    }
    if state.get("show_mask"):
        if store.mask_params is not None:
            feats = mask_features(snap.image, snap.gbuffer.normal,
                                  snap.gbuffer.coverage, delta, rec.light, rec.camera)
            m = predict_mask(store.mask_params, feats)
        else:
            m = gt_mask(snap.image, relit, coverage=snap.gbuffer.coverage)
        out["mask_png_base64"] = base64.b64encode(encode_gray_png(m)).decode("ascii")
    metrics = _ground_truth_metrics(store, snap, delta, relit)
    if metrics is not None:
        out["metrics"] = metrics
    out["timing_ms"] = (time.perf_counter() - t0) * 1000.0
    return out


def _ground_truth_metrics(store: SceneStore, snap: SceneSnapshot, delta: DeltaL,
                          relit: np.ndarray):
    """Compare against a manifest render when the edited light exists there."""
    target = apply_delta(snap.record.light, delta)
    for _lid, light in snap.sibling_lights:
        same = (light.kind == target.kind
                and abs(light.yaw - target.yaw) < 1e-9
                and abs(light.pitch - target.pitch) < 1e-9
                and abs(light.energy_lux - target.energy_lux) < 1e-9 * target.energy_lux
                and abs(light.temperature_k - target.temperature_k) < 1e-6)
        if not same:
            continue
        gt_img, _ = render(snap.record.scene, snap.record.camera, light)
        a = normalize_pm1(relit, store.exposure)
        b = normalize_pm1(gt_img, store.exposure)
        return {"rmse": rmse(a, b), "ssim": ssim(a, b), "psnr": psnr(a, b)}
    return None


def scene_listing(store: SceneStore) -> list:
    out = []
    for sid in store.order:
        snap = store.snapshots[sid]
        out.append({"scene_id": sid,
                    "object_id": snap.record.object_id,
                    "view_id": snap.record.view_id,
                    "light_id": snap.record.light_id,
                    "source_light": snap.record.light.to_json(),
                    "edit_bounds": store.edit_bounds(snap)})
    return out


if HAVE_FASTAPI:

    class RelightBody(BaseModel):
        model_config = ConfigDict(extra="forbid")
        scene_id: str
        dyaw_deg: float = 0.0
        dpitch_deg: float = 0.0
        dlux_log: float | None = None
        denergy_factor: float | None = None
        dtemp_k: float = 0.0
        show_mask: bool = False

    def create_app(cfg: PipelineConfig, manifest_path, root) -> "FastAPI":
        store = SceneStore.from_manifest(manifest_path, root, cfg.service.exposure,
                                         cfg.service.max_scenes)
        app = FastAPI(title="relightkit", version="1")
        app.state.store = store

        @app.exception_handler(RequestValidationError)
        async def validation_handler(request: Request, exc: RequestValidationError):
            # malformed JSON is a 400; schema violations stay 422
            for err in exc.errors():
                if err.get("type", "").startswith("json"):
                    return JSONResponse(status_code=400,
                                        content={"detail": "malformed JSON body"})
            return JSONResponse(status_code=422, content={"detail": exc.errors()})

        @app.get("/v1/scenes")
        async def scenes():
            return {"scenes": scene_listing(store)}

        @app.get("/v1/scenes/{scene_id}/preview")
        async def preview(scene_id: str):
            snap = store.snapshots.get(scene_id)
            if snap is None:
                return JSONResponse(status_code=404,
                                    content={"detail": f"unknown scene {scene_id!r}"})
            return Response(content=snap.preview_png, media_type="image/png")

        @app.post("/v1/relight")
        async def relight_endpoint(body: RelightBody):
            try:
                result = render_edit(store, body.model_dump())
            except KeyError as e:
                return JSONResponse(status_code=404, content={"detail": str(e)})
            except EditError as e:
                return JSONResponse(status_code=422,
                                    content={"detail": str(e), "field": e.field})
            return result

        # explorer static assets, when the frontend build exists
        static_dir = os.environ.get(
            "RELIGHTKIT_STATIC",
            os.path.join(os.path.dirname(__file__), "..", "..", "frontend", "dist"))
        if os.path.isdir(static_dir):
            from fastapi.staticfiles import StaticFiles
            app.mount("/", StaticFiles(directory=static_dir, html=True),
                      name="explorer")
        return app
