# Scoring relit images
#
# RMSE / SSIM / PSNR on the normalized [-1,1] RGB range, grouped by the kind
# of lighting variation.  The oracle relight hits the 99 dB PSNR cap; a lazy
# baseline that returns the source image unchanged does not.

from relightkit import (LightParams, RelightRequest, delta_illumination,
                        relight)
from relightkit.dataset import sample_camera_hemisphere
from relightkit.metrics import evaluate_pairs
from relightkit.render import render
from relightkit.scene import single_primitive_scene

source = LightParams.directional(0.5, 0.9, 1000, 5000)
targets = {
    "temperature": LightParams.directional(0.5, 0.9, 1000, 8200),
    "position": LightParams.directional(1.9, 1.25, 1000, 5000),
    "energy": LightParams.directional(0.5, 0.9, 2600, 5000),
}

oracle_entries, lazy_entries = [], []
for i, (variation, target) in enumerate(targets.items()):
    for seed in (3 * i, 3 * i + 1):
        scene = single_primitive_scene(seed)
        cam = sample_camera_hemisphere(seed, (2.0, 3.0), (0, 0, 0.5), 96, 96)
        img, gbuf = render(scene, cam, source)
        gt, _ = render(scene, cam, target)
        pred = relight(RelightRequest(gbuf, source,
                                      delta_illumination(source, target),
                                      cam, mode="local", source_image=img))
        oracle_entries.append((variation, pred, gt))
        lazy_entries.append((variation, img, gt))

for name, entries in (("oracle relight", oracle_entries),
                      ("source passthrough", lazy_entries)):
    report = evaluate_pairs(entries)
    print(f"\n{name}:")
    print(f"  {'variation':<12} {'rmse':>8} {'ssim':>8} {'psnr':>8} {'n':>3}")
    for row in report.rows + [report.overall]:
        print(f"  {row.variation:<12} {row.rmse:8.4f} {row.ssim:8.4f} "
              f"{row.psnr:8.2f} {row.n_pairs:3d}")
