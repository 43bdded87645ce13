# Micro-renderer gallery
#
# Renders a few procedural desk scenes under different lights and tiles the
# images next to their G-buffer channels.  Every quantity is linear radiance;
# the PNG step applies the sRGB transfer function for display only.

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from relightkit import LightParams
from relightkit.imgio import srgb_encode
from relightkit.render import render
from relightkit.scene import CameraPose, sample_object_scene

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

cam = CameraPose((2.4, -1.6, 2.2), (0, 0, 0.4), width=160, height=160)
lights = [
    ("warm low sun", LightParams.directional(math.radians(35), math.radians(70),
                                             1400, 2600)),
    ("cool overhead", LightParams.directional(math.radians(-60), math.radians(20),
                                              1000, 8500)),
    ("neutral side", LightParams.directional(math.radians(140), math.radians(50),
                                             1800, 5500)),
]

fig, axes = plt.subplots(3, 5, figsize=(14, 8.5))
for row, seed in enumerate((2, 7, 12)):
    scene = sample_object_scene(seed)
    name, light = lights[row]
    img, gb = render(scene, cam, light)
    axes[row, 0].imshow(srgb_encode(img))
    axes[row, 0].set_title(f"seed {seed}: {name}", fontsize=9)
    axes[row, 1].imshow(srgb_encode(gb.albedo))
    axes[row, 1].set_title("albedo", fontsize=9)
    axes[row, 2].imshow(gb.normal * 0.5 + 0.5)
    axes[row, 2].set_title("camera-space normals", fontsize=9)
    axes[row, 3].imshow(gb.roughness, cmap="viridis", vmin=0, vmax=1)
    axes[row, 3].set_title("roughness", fontsize=9)
    depth = np.where(np.isfinite(gb.depth), gb.depth, np.nan)
    axes[row, 4].imshow(depth, cmap="magma")
    axes[row, 4].set_title("depth (m)", fontsize=9)
for ax in axes.ravel():
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(os.path.join(OUT, "render_gallery.png"), dpi=120)
print("wrote", os.path.join(OUT, "render_gallery.png"))

# Radiance is linear in light energy: doubling lux doubles every pixel.
scene = sample_object_scene(2)
dim, gbd = render(scene, cam, LightParams.directional(0.6, 0.9, 500, 5500))
bright, _ = render(scene, cam, LightParams.directional(0.6, 0.9, 1000, 5500))
fg = gbd.coverage > 0
print("energy linearity holds exactly:", bool(np.array_equal(2 * dim[fg], bright[fg])))
