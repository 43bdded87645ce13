# Lighting-aware masks and loss weighting
#
# Where does an image actually change when the light moves?  The ground-truth
# mask blends an absolute log-luminance difference with an exposure-robust
# distance and normalizes the result into [0,1].  A tiny per-pixel network
# then learns to predict that map from the source image and the lighting edit
# alone, so it works when no target image exists.

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from relightkit import LightParams, delta_illumination
from relightkit.imgio import srgb_encode
from relightkit.mask import (gt_mask, mask_features, mask_to_weight,
                             predict_mask, train_mask_predictor)
from relightkit.render import render
from relightkit.scene import CameraPose, Material, Primitive, SceneSpec

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

lambert = Material((0.7, 0.7, 0.7), roughness=0.85, metallic=0.0, specular=0.0)
scene = SceneSpec((
    Primitive("sphere", lambert, (0, 0, 0.5), scale=(0.35, 0.35, 0.35)),
    Primitive("plane", Material((0.6, 0.6, 0.6), roughness=0.9, specular=0.0),
              scale=(6, 6, 1)),
))
cam = CameraPose((0.0, -2.2, 2.0), (0, 0, 0.3), width=160, height=160)
source = LightParams.directional(math.radians(40), math.radians(55), 1000, 5500)
target = LightParams.directional(math.radians(115), math.radians(55), 1000, 5500)

img_s, gbuf = render(scene, cam, source)
img_t, _ = render(scene, cam, target)
mask = gt_mask(img_s, img_t, coverage=gbuf.coverage)
weights = mask_to_weight(mask, gamma=1.0)
print(f"mask mass {mask.sum():.0f} px-equivalents, weight map in "
      f"[{weights.min():.2f}, {weights.max():.2f}]")

# train the predictor on this pair and ask it for the same edit
delta = delta_illumination(source, target)
feats = mask_features(img_s, gbuf.normal, gbuf.coverage, delta, source, cam)
params, history = train_mask_predictor([feats], [mask], iterations=120)
predicted = predict_mask(params, feats)
print(f"predictor loss {history[0]:.3f} -> {history[-1]:.3f} "
      f"({len(history)} evaluations)")

fig, axes = plt.subplots(1, 5, figsize=(16, 3.4))
for ax, (title, im) in zip(axes, [
        ("source", srgb_encode(img_s)), ("target", srgb_encode(img_t)),
        ("ground-truth mask", mask), ("predicted mask", predicted),
        ("loss weights", weights)]):
    shown = ax.imshow(im, cmap=None if im.ndim == 3 else "inferno")
    ax.set_title(title, fontsize=10)
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(os.path.join(OUT, "lighting_masks.png"), dpi=120)
print("wrote", os.path.join(OUT, "lighting_masks.png"))
