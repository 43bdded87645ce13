# Relative illumination in 11 numbers
#
# A lighting edit is encoded as the difference of two physical light
# descriptions: 9 spherical-harmonic coefficients for the direction change,
# one log-energy ratio, one normalized temperature difference.  This script
# walks through the encoding and plots how the pieces behave.

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from relightkit import (LightParams, apply_delta, delta_illumination,
                        sh_project, temperature_to_rgb, yaw_pitch_to_direction)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

# A light is yaw/pitch plus energy in lux and color temperature in kelvin.
morning = LightParams.directional(yaw=math.radians(40), pitch=math.radians(55),
                                  energy_lux=800, temperature_k=4000)
noon = LightParams.directional(yaw=math.radians(130), pitch=math.radians(25),
                               energy_lux=2000, temperature_k=6500)

delta = delta_illumination(morning, noon)
print("encoding of morning -> noon:")
print("  sh difference:", np.round(delta.delta_sh, 4))
print("  log-energy:   ", round(delta.delta_log_e, 4), "(ratio", round(math.exp(delta.delta_log_e), 2), ")")
print("  temperature:  ", delta.delta_tau, "(+2500 K / 10000)")

# The encoding inverts onto concrete parameters through the recorded edit.
recovered = apply_delta(morning, delta)
print("recovered target:", recovered.energy_lux, "lux,", recovered.temperature_k, "K")

# Small angular edits make small encodings: plot |delta_sh| against yaw offset.
offsets = np.linspace(0, 180, 91)
base = sh_project(yaw_pitch_to_direction(0.0, math.radians(60)))
norms = [np.linalg.norm(sh_project(
    yaw_pitch_to_direction(math.radians(d), math.radians(60))) - base)
    for d in offsets]

fig, axes = plt.subplots(1, 2, figsize=(10, 3.5))
axes[0].plot(offsets, norms)
axes[0].set_xlabel("yaw offset (deg)")
axes[0].set_ylabel("|sh difference|")
axes[0].set_title("direction encoding grows smoothly")

# Temperature to linear RGB along the Planckian-style locus.
taus = np.linspace(1000, 12000, 221)
ramp = np.array([temperature_to_rgb(t) for t in taus])
axes[1].imshow(ramp[None, :, :] ** (1 / 2.2), aspect="auto",
               extent=(1000, 12000, 0, 1))
axes[1].set_yticks([])
axes[1].set_xlabel("temperature (K)")
axes[1].set_title("emitter chromaticity")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "relative_illumination.png"), dpi=120)
print("wrote", os.path.join(OUT, "relative_illumination.png"))
