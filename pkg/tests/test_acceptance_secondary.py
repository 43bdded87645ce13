"""Secondary acceptance: the explorer round-trip against the live service.

The browser-side pieces (debounce, single in-flight request, history
semantics) are covered by the frontend's own vitest suite; this module checks
the service-facing half of the contract plus the latency budget at 128^2.
"""

import base64
import json
import os
import statistics
import subprocess
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from relightkit.cli import main
from relightkit.config import PipelineConfig
from relightkit.dataset import DatasetConfig, generate_dataset
from relightkit.service import create_app

FRONTEND = os.path.join(os.path.dirname(__file__), "..", "frontend")


@pytest.fixture(scope="module")
def full_res_service(tmp_path_factory):
    root = str(tmp_path_factory.mktemp("svc128"))
    cfg = PipelineConfig(seed=23)
    cfg.dataset = DatasetConfig(seed=23, objects=2, views_per_object=1,
                                lights_per_view=3, width=128, height=128)
    manifest = generate_dataset(cfg.dataset, root)
    app = create_app(cfg, manifest, root)
    return TestClient(app), root, cfg


def test_zero_edit_round_trip(full_res_service):
    client, _root, _cfg = full_res_service
    sid = client.get("/v1/scenes").json()["scenes"][0]["scene_id"]
    preview = client.get(f"/v1/scenes/{sid}/preview").content
    body = client.post("/v1/relight", json={"scene_id": sid}).json()
    assert base64.b64decode(body["png_base64"]) == preview
    print("PASS: explorer zero-edit returns the source preview byte-identically")


def test_yaw_drag_replay_byte_for_byte(full_res_service, tmp_path):
    client, root, _cfg = full_res_service
    sid = client.get("/v1/scenes").json()["scenes"][0]["scene_id"]
    history = [{"scene_id": sid, "dyaw_deg": float(d)}
               for d in np.linspace(-60, 60, 20)]
    responses = [client.post("/v1/relight", json=h).json() for h in history]
    hist_path = tmp_path / "history.json"
    hist_path.write_text(json.dumps(history))
    replay_dir = tmp_path / "replay"
    assert main(["relight", "--out", root, "--replay", str(hist_path),
                 "--replay-out", str(replay_dir)]) == 0
    for i, resp in enumerate(responses):
        got = (replay_dir / f"edit_{i:03d}.png").read_bytes()
        assert got == base64.b64decode(resp["png_base64"])
    print("PASS: 20-edit yaw drag replayed through the CLI byte-for-byte")


def test_median_latency_at_128(full_res_service):
    client, _root, _cfg = full_res_service
    sid = client.get("/v1/scenes").json()["scenes"][0]["scene_id"]
    timings = []
    for d in np.linspace(-45, 45, 12):
        t0 = time.perf_counter()
        r = client.post("/v1/relight", json={"scene_id": sid,
                                             "dyaw_deg": float(d)})
        assert r.status_code == 200
        timings.append((time.perf_counter() - t0) * 1000.0)
    median = statistics.median(timings)
    assert median <= 300.0
    print(f"PASS: median relight latency at 128^2 = {median:.0f} ms <= 300 ms")


def test_frontend_build_is_served(full_res_service):
    dist = os.path.join(FRONTEND, "dist")
    if not os.path.isdir(dist):
        pytest.skip("frontend not built (run `npm run build` in frontend/)")
    client, _root, _cfg = full_res_service
    r = client.get("/index.html")
    assert r.status_code == 200
    assert b"relightkit explorer" in r.content
    print("PASS: built explorer assets served by the service")


def test_frontend_unit_suite():
    if not os.path.isdir(os.path.join(FRONTEND, "node_modules")):
        pytest.skip("frontend dependencies not installed")
    proc = subprocess.run(["npm", "test", "--silent"], cwd=FRONTEND,
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    print("PASS: explorer unit suite (debounce, in-flight cap, history) green")
