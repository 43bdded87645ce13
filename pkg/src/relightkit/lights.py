"""Physical light parameterization and the relative-illumination encoding.

A light is described by angular position (yaw, pitch), radiometric energy in
lux and correlated color temperature in kelvin.  Lighting *edits* are encoded
as an 11-dimensional relative vector: the difference of second-order real
spherical-harmonic projections of the source and target directions (9), the
log-energy ratio (1) and the normalized temperature difference (1).  The exact
angular edit (dyaw, dpitch) rides along as metadata so the encoding can be
inverted onto concrete light parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Normalization constant for temperature differences: delta_tau = dK / 10000.
TAU_SCALE = 10000.0

TEMP_MIN_K = 1000.0
TEMP_MAX_K = 12000.0

# Real SH basis constants, no Condon-Shortley phase, ordered
# (0,0),(1,-1),(1,0),(1,1),(2,-2),(2,-1),(2,0),(2,1),(2,2).
_SH_C00 = 0.5 * math.sqrt(1.0 / math.pi)          # 0.282095
_SH_C1 = math.sqrt(3.0 / (4.0 * math.pi))         # 0.488603
_SH_C2A = math.sqrt(15.0 / (4.0 * math.pi))       # 1.092548  (xy, yz, xz)
_SH_C20 = 0.25 * math.sqrt(5.0 / math.pi)         # 0.315392  (3z^2 - 1)
_SH_C22 = 0.25 * math.sqrt(15.0 / math.pi)        # 0.546274  (x^2 - y^2)


def yaw_pitch_to_direction(yaw: float, pitch: float) -> np.ndarray:
    """Unit direction for (yaw, pitch); pitch is the polar angle from +z.

    Returns [cos(yaw) sin(pitch), sin(yaw) sin(pitch), cos(pitch)].
    """
    if not 0.0 < pitch < math.pi:
        raise ValueError(f"pitch must lie strictly inside (0, pi), got {pitch}")
    sp = math.sin(pitch)
    return np.array([math.cos(yaw) * sp, math.sin(yaw) * sp, math.cos(pitch)])


def direction_to_yaw_pitch(d: np.ndarray) -> tuple[float, float]:
    """Inverse of yaw_pitch_to_direction for directions off the z axis."""
    x, y, z = float(d[0]), float(d[1]), float(d[2])
    r = math.sqrt(x * x + y * y + z * z)
    if r <= 0.0:
        raise ValueError("zero vector has no direction")
    pitch = math.acos(max(-1.0, min(1.0, z / r)))
    if not 0.0 < pitch < math.pi:
        raise ValueError(f"direction lies on the z axis (pitch {pitch}); yaw undefined")
    return math.atan2(y, x), pitch


def sh_project(d: np.ndarray) -> np.ndarray:
    """Evaluate the 9 real SH basis functions (l <= 2) at a unit direction."""
    d = np.asarray(d, dtype=float)
    n2 = float(d @ d)
    if abs(n2 - 1.0) > 1e-9:
        raise ValueError(f"sh_project requires a unit direction, |d|^2 = {n2}")
    x, y, z = d
    return np.array([
        _SH_C00,
        _SH_C1 * y,
        _SH_C1 * z,
        _SH_C1 * x,
        _SH_C2A * x * y,
        _SH_C2A * y * z,
        _SH_C20 * (3.0 * z * z - 1.0),
        _SH_C2A * x * z,
        _SH_C22 * (x * x - y * y),
    ])


@dataclass(frozen=True)
class LightParams:
    """A directional or point light.

    yaw/pitch give the direction toward the light (for point lights, the
    direction from the scene origin to the light position).
    """
    kind: str                      # "directional" | "point"
    yaw: float                     # radians
    pitch: float                   # radians, polar angle from +z in (0, pi)
    energy_lux: float              # > 0
    temperature_k: float           # [1000, 12000]
    position: tuple[float, float, float] | None = None  # point lights only, meters

    def __post_init__(self):
        if self.kind not in ("directional", "point"):
            raise ValueError(f"unknown light kind {self.kind!r}")
        if not 0.0 < self.pitch < math.pi:
            raise ValueError(f"pitch must lie strictly inside (0, pi), got {self.pitch}")
        if not self.energy_lux > 0.0:
            raise ValueError(f"energy must be positive, got {self.energy_lux}")
        if not TEMP_MIN_K <= self.temperature_k <= TEMP_MAX_K:
            raise ValueError(
                f"temperature {self.temperature_k} K outside [{TEMP_MIN_K}, {TEMP_MAX_K}]")
        if self.kind == "directional":
            if self.position is not None:
                object.__setattr__(self, "position", None)
        else:
            if self.position is None:
                raise ValueError("point light requires a position")
            p = np.asarray(self.position, dtype=float)
            r = float(np.linalg.norm(p))
            if r <= 0.0:
                raise ValueError("point light position must be nonzero")
            if float(np.linalg.norm(p / r - self.direction())) > 1e-9:
                raise ValueError("point light position inconsistent with yaw/pitch")

    @classmethod
    def directional(cls, yaw, pitch, energy_lux=1000.0, temperature_k=5500.0):
        return cls("directional", yaw, pitch, energy_lux, temperature_k)

    @classmethod
    def point_at(cls, position, energy_lux=1000.0, temperature_k=5500.0):
        yaw, pitch = direction_to_yaw_pitch(np.asarray(position, dtype=float))
        return cls("point", yaw, pitch, energy_lux, temperature_k,
                   tuple(float(c) for c in position))

    def direction(self) -> np.ndarray:
        """Unit vector pointing from the scene toward the light."""
        return yaw_pitch_to_direction(self.yaw, self.pitch)

    def radius(self) -> float:
        if self.kind != "point":
            raise ValueError("radius is only defined for point lights")
        return float(np.linalg.norm(np.asarray(self.position, dtype=float)))

    def to_json(self) -> dict:
        obj = {
            "kind": self.kind,
            "yaw_rad": self.yaw,
            "pitch_rad": self.pitch,
            "energy_lux": self.energy_lux,
            "temperature_k": self.temperature_k,
        }
        if self.position is not None:
            obj["position"] = list(self.position)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "LightParams":
        pos = obj.get("position")
        return cls(obj["kind"], obj["yaw_rad"], obj["pitch_rad"],
                   obj["energy_lux"], obj["temperature_k"],
                   tuple(pos) if pos is not None else None)


@dataclass(frozen=True, eq=False)
class DeltaL:
    """Relative illumination: [delta sh (9), delta log E, delta tau].

    dyaw/dpitch record the exact angular edit; the SH difference is the
    conditioning representation and is not invertible on its own.
    """
    delta_sh: np.ndarray
    delta_log_e: float
    delta_tau: float
    dyaw: float = 0.0
    dpitch: float = 0.0

    def __post_init__(self):
        sh = np.asarray(self.delta_sh, dtype=float)
        if sh.shape != (9,):
            raise ValueError(f"delta_sh must have shape (9,), got {sh.shape}")
        object.__setattr__(self, "delta_sh", sh)
        if not np.all(np.isfinite(self.vector())):
            raise ValueError("relative-illumination components must be finite")

    @classmethod
    def zero(cls) -> "DeltaL":
        return cls(np.zeros(9), 0.0, 0.0, 0.0, 0.0)

    def vector(self) -> np.ndarray:
        """The 11-dim encoding [delta_sh, delta_log_e, delta_tau]."""
        return np.concatenate([self.delta_sh, [self.delta_log_e, self.delta_tau]])

    def is_zero(self) -> bool:
        return (not np.any(self.delta_sh) and self.delta_log_e == 0.0
                and self.delta_tau == 0.0 and self.dyaw == 0.0 and self.dpitch == 0.0)

    def to_json(self) -> dict:
        return {
            "delta_sh": [float(c) for c in self.delta_sh],
            "delta_log_e": self.delta_log_e,
            "delta_tau": self.delta_tau,
            "edit": {"dyaw_rad": self.dyaw, "dpitch_rad": self.dpitch},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DeltaL":
        edit = obj.get("edit", {})
        return cls(np.array(obj["delta_sh"], dtype=float), obj["delta_log_e"],
                   obj["delta_tau"], edit.get("dyaw_rad", 0.0), edit.get("dpitch_rad", 0.0))


def delta_illumination(source: LightParams, target: LightParams) -> DeltaL:
    """Relative illumination from source to target lighting.

    delta_sh  = sh(omega_t) - sh(omega_s)
    delta_log_e = ln E_t - ln E_s
    delta_tau = (tau_t - tau_s) / 10000
    """
    return DeltaL(
        sh_project(target.direction()) - sh_project(source.direction()),
        math.log(target.energy_lux) - math.log(source.energy_lux),
        (target.temperature_k - source.temperature_k) / TAU_SCALE,
        target.yaw - source.yaw,
        target.pitch - source.pitch,
    )


def apply_delta(source: LightParams, delta: DeltaL, clamp: bool = False) -> LightParams:
    """Apply a relative-illumination edit to a light.

    Angles come from the recorded (dyaw, dpitch) edit, energy from
    exp(delta_log_e), temperature from delta_tau * 10000.  With clamp=True,
    out-of-range pitch/temperature are clamped instead of raising.
    """
    yaw = source.yaw + delta.dyaw
    pitch = source.pitch + delta.dpitch
    energy = source.energy_lux * math.exp(delta.delta_log_e)
    temp = source.temperature_k + TAU_SCALE * delta.delta_tau
    if clamp:
        eps = 1e-6
        pitch = min(max(pitch, eps), math.pi - eps)
        temp = min(max(temp, TEMP_MIN_K), TEMP_MAX_K)
    else:
        if not 0.0 < pitch < math.pi:
            raise ValueError(f"edit drives pitch to {pitch}, outside (0, pi)")
        if not TEMP_MIN_K <= temp <= TEMP_MAX_K:
            raise ValueError(
                f"edit drives temperature to {temp} K, outside [{TEMP_MIN_K}, {TEMP_MAX_K}]")
    position = None
    if source.kind == "point":
        position = tuple(source.radius() * yaw_pitch_to_direction(yaw, pitch))
    return LightParams(source.kind, yaw, pitch, energy, temp, position)


def delta_from_edit(source: LightParams, dyaw: float = 0.0, dpitch: float = 0.0,
                    dlog_e: float = 0.0, dtau: float = 0.0,
                    clamp: bool = False) -> DeltaL:
    """Relative illumination for a human-units edit applied to a known source."""
    probe = DeltaL(np.zeros(9), dlog_e, dtau, dyaw, dpitch)
    return delta_illumination(source, apply_delta(source, probe, clamp=clamp))


def temperature_to_rgb(temperature_k: float) -> np.ndarray:
    """Linear RGB chromaticity of a blackbody-like emitter, max channel = 1.

    Piecewise polynomial fit of the Planckian locus (Tanner Helland form),
    clamped to [0, 255] and renormalized so the brightest channel is 1.
    """
    if not TEMP_MIN_K <= temperature_k <= TEMP_MAX_K:
        raise ValueError(
            f"temperature {temperature_k} K outside [{TEMP_MIN_K}, {TEMP_MAX_K}]")
    t = temperature_k / 100.0
    if t <= 66.0:
        red = 255.0
        green = 99.4708025861 * math.log(t) - 161.1195681661
    else:
        red = 329.698727446 * (t - 60.0) ** -0.1332047592
        green = 288.1221695283 * (t - 60.0) ** -0.0755148492
    if t >= 66.0:
        blue = 255.0
    elif t <= 19.0:
        blue = 0.0
    else:
        blue = 138.5177312231 * math.log(t - 10.0) - 305.0447927307
    rgb = np.clip([red, green, blue], 0.0, 255.0) / 255.0
    return rgb / rgb.max()


def project_token(delta: DeltaL, proj: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Affine map of the 11-dim relative-illumination vector to a conditioning token."""
    proj = np.asarray(proj, dtype=float)
    if proj.ndim != 2 or proj.shape[1] != 11:
        raise ValueError(f"projection must have shape (d_token, 11), got {proj.shape}")
    if bias is None:
        bias = np.zeros(proj.shape[0])
    bias = np.asarray(bias, dtype=float)
    if bias.shape != (proj.shape[0],):
        raise ValueError(f"bias shape {bias.shape} does not match token dim {proj.shape[0]}")
    return proj @ delta.vector() + bias
