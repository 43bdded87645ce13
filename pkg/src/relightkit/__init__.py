"""Desk-scale physically grounded relighting toolkit."""

from .lights import (DeltaL, LightParams, apply_delta, delta_from_edit,
                     delta_illumination, project_token, sh_project,
                     temperature_to_rgb, yaw_pitch_to_direction)
from .mask import (bce_dice_loss, gt_mask, luminance, mask_to_weight,
                   masked_blend, normalize_mask, predict_mask, robust_distance,
                   train_mask_predictor, weighted_mse)
from .metrics import normalize_pm1, psnr, rmse, ssim
from .proxy import (EncoderParams, ProxyMaps, encode, fit_encoder,
                    normalize_normals, pool_project, proxy_loss)
from .dpo import (DpoConfig, PreferencePair, RewardBreakdown,
                  build_preference_pairs, dpo_loss, dpo_refine, reward,
                  reward_delta)
from .relight import RelightRequest, relight, relight_with_mask
from .render import GBuffer, render, shade_pixel, visibility
from .scene import CameraPose, Material, Primitive, SceneSpec

__version__ = "0.1.0"
