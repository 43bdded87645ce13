# Driving the relighting service
#
# The `relightkit serve` command exposes scenes over HTTP for the browser
# explorer.  This script exercises the same endpoints in-process: list
# scenes, fetch a preview, post edits in human units, and read back the
# echoed 11-dim encoding plus ground-truth metrics when the edit lands on a
# light the dataset already rendered.

import base64
import json
import os
import tempfile

from fastapi.testclient import TestClient

from relightkit.config import PipelineConfig
from relightkit.dataset import DatasetConfig, generate_dataset
from relightkit.service import create_app

root = tempfile.mkdtemp(prefix="relightkit_svc_")
cfg = PipelineConfig(seed=33)
cfg.dataset = DatasetConfig(seed=33, objects=2, views_per_object=1,
                            lights_per_view=3, width=96, height=96)
manifest = generate_dataset(cfg.dataset, root)
client = TestClient(create_app(cfg, manifest, root))

scenes = client.get("/v1/scenes").json()["scenes"]
print(f"{len(scenes)} scenes; first:", scenes[0]["scene_id"])
print("edit bounds:", json.dumps(scenes[0]["edit_bounds"]))

sid = scenes[0]["scene_id"]
preview = client.get(f"/v1/scenes/{sid}/preview").content
open(os.path.join(root, "preview.png"), "wb").write(preview)

# a zero edit returns the preview byte for byte
r = client.post("/v1/relight", json={"scene_id": sid}).json()
print("zero edit is identity:", base64.b64decode(r["png_base64"]) == preview)

# warm the light, dim it, swing it 70 degrees
edit = {"scene_id": sid, "dyaw_deg": 70.0, "denergy_factor": 0.5,
        "dtemp_k": -2000.0, "show_mask": True}
r = client.post("/v1/relight", json=edit).json()
print("echoed delta:", json.dumps({k: (round(v, 4) if isinstance(v, float) else v)
                                   for k, v in r["delta_l"].items()
                                   if k != "delta_sh"}))
print("relight took", round(r["timing_ms"], 1), "ms")
open(os.path.join(root, "relit.png"), "wb").write(base64.b64decode(r["png_base64"]))
open(os.path.join(root, "mask.png"), "wb").write(base64.b64decode(r["mask_png_base64"]))
print("wrote preview/relit/mask PNGs under", root)

# out-of-range edits name the violated bound instead of guessing
r = client.post("/v1/relight", json={"scene_id": sid, "dtemp_k": -9000.0})
print("out-of-range edit ->", r.status_code, r.json()["detail"])
