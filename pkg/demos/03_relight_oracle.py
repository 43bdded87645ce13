# Relighting against the renderer oracle
#
# The relighting operator takes per-pixel intrinsics, the source light and a
# relative edit, and synthesizes the target image analytically.  Because the
# renderer produced those intrinsics, a fresh render at the target light is
# an exact oracle: local-mode relighting must match it wherever no shadow is
# involved, and geometric mode must match it everywhere.

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from relightkit import LightParams, RelightRequest, delta_illumination, relight
from relightkit.imgio import srgb_encode
from relightkit.render import render
from relightkit.scene import CameraPose, Material, Primitive, SceneSpec

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

mat = Material((0.75, 0.45, 0.25), roughness=0.35, metallic=0.0)
scene = SceneSpec((
    Primitive("sphere", mat, (0, 0, 0.55), scale=(0.35, 0.35, 0.35)),
    Primitive("plane", Material((0.6, 0.6, 0.62), roughness=0.8), scale=(6, 6, 1)),
))
cam = CameraPose((0.0, -2.4, 2.0), (0, 0, 0.3), width=160, height=160)
source = LightParams.directional(math.radians(35), math.radians(55), 1000, 5500)
target = LightParams.directional(math.radians(125), math.radians(45), 1500, 3200)

img_s, gbuf = render(scene, cam, source)
delta = delta_illumination(source, target)
print("edit:", round(math.degrees(delta.dyaw)), "deg yaw,",
      round(delta.delta_log_e, 3), "log-energy,", delta.delta_tau, "tau")

local = relight(RelightRequest(gbuf, source, delta, cam, mode="local",
                               source_image=img_s))
geometric = relight(RelightRequest(gbuf, source, delta, cam, mode="geometric",
                                   scene=scene, source_image=img_s))
oracle, _ = render(scene, cam, target)

fg = gbuf.coverage > 0
err_local = np.abs(local[fg] - oracle[fg]).max()
err_geo = np.abs(geometric[fg] - oracle[fg]).max()
print(f"max |error| vs oracle: local {err_local:.2e} (shadows missing), "
      f"geometric {err_geo:.2e}")

fig, axes = plt.subplots(1, 5, figsize=(16, 3.4))
panels = [("source", img_s), ("local relight", local),
          ("geometric relight", geometric), ("oracle render", oracle)]
for ax, (title, im) in zip(axes, panels):
    ax.imshow(srgb_encode(im))
    ax.set_title(title, fontsize=10)
diff = np.abs(local - oracle).max(axis=2)
axes[4].imshow(diff, cmap="inferno")
axes[4].set_title("local-mode error = moved shadows", fontsize=10)
for ax in axes:
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(os.path.join(OUT, "relight_oracle.png"), dpi=120)
print("wrote", os.path.join(OUT, "relight_oracle.png"))
