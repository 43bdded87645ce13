"""Image and array serialization: sRGB PNG previews and raw float32 planes.

Raw files carry one JSON header line {"h", "w", "channels"} followed by
little-endian float32 data, planar (channel-major, row-major planes).  The
coverage mask uses the same header with "dtype": "uint8" and raw 0/1 bytes.
JSON emitted anywhere in this package writes floats with 17 significant
digits so round-trips are lossless.
"""

from __future__ import annotations

import io
import json

import numpy as np
from PIL import Image


def json_compact(obj) -> str:
    """json.dumps with floats formatted to 17 significant digits."""
    return _write_json(obj)


def _write_json(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError(f"non-finite float {v} is not representable in JSON")
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_write_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + _write_json(v)
                              for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """Linear [0,1] -> sRGB-encoded [0,1] (standard transfer function)."""
    x = np.clip(linear, 0.0, 1.0)
    enc = np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1.0 / 2.4) - 0.055)
    # 1.055 - 0.055 misses 1.0 by an ulp; keep the endpoints exact
    return np.clip(np.where(x >= 1.0, 1.0, enc), 0.0, 1.0)


def srgb_decode(encoded: np.ndarray) -> np.ndarray:
    """sRGB-encoded [0,1] -> linear [0,1]."""
    x = np.clip(encoded, 0.0, 1.0)
    return np.where(x <= 0.04045, x / 12.92, np.power((x + 0.055) / 1.055, 2.4))


def to_srgb_u8(img: np.ndarray, exposure: float = 1.0) -> np.ndarray:
    if exposure <= 0.0:
        raise ValueError(f"exposure must be positive, got {exposure}")
    return np.round(srgb_encode(img * exposure) * 255.0).astype(np.uint8)


def encode_srgb_png(img: np.ndarray, exposure: float = 1.0) -> bytes:
    """8-bit sRGB PNG of a linear-radiance image after exposure scaling."""
    u8 = to_srgb_u8(np.asarray(img, dtype=float), exposure)
    if u8.ndim == 2:
        pil = Image.fromarray(u8, mode="L")
    else:
        pil = Image.fromarray(u8, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def encode_gray_png(values: np.ndarray) -> bytes:
    """8-bit grayscale PNG of a [0,1] map (no transfer function)."""
    u8 = np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="L").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def _planar(data: np.ndarray) -> np.ndarray:
    if data.ndim == 2:
        data = data[:, :, None]
    return np.moveaxis(data, 2, 0)


def write_raw_f32(data: np.ndarray) -> bytes:
    """Serialize an H x W (x C) array as header line + planar float32 LE."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim not in (2, 3):
        raise ValueError(f"raw format expects 2- or 3-dim arrays, got {data.ndim}")
    planes = _planar(data).astype("<f4")
    header = {"h": data.shape[0], "w": data.shape[1], "channels": planes.shape[0]}
    return (json_compact(header) + "\n").encode("ascii") + planes.tobytes()


def read_raw_f32(blob: bytes) -> np.ndarray:
    nl = blob.index(b"\n")
    header = json.loads(blob[:nl].decode("ascii"))
    h, w, c = header["h"], header["w"], header["channels"]
    dtype = header.get("dtype", "float32")
    if dtype == "uint8":
        planes = np.frombuffer(blob[nl + 1:], dtype=np.uint8, count=h * w * c)
    else:
        planes = np.frombuffer(blob[nl + 1:], dtype="<f4", count=h * w * c)
    arr = np.moveaxis(planes.reshape(c, h, w), 0, 2).astype(np.float64)
    return arr[:, :, 0] if c == 1 else arr


def write_raw_u8(data: np.ndarray) -> bytes:
    """Same container as write_raw_f32 but with raw 0/255-free uint8 payload."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("uint8 raw format is single-plane")
    header = {"h": data.shape[0], "w": data.shape[1], "channels": 1, "dtype": "uint8"}
    return (json_compact(header) + "\n").encode("ascii") + data.astype(np.uint8).tobytes()


def save_raw(path, data: np.ndarray, dtype: str = "f32") -> None:
    try:
        blob = write_raw_u8(data) if dtype == "u8" else write_raw_f32(data)
        with open(path, "wb") as f:
            f.write(blob)
    except OSError as e:
        raise OSError(f"failed writing raw file {path}: {e}") from e


def load_raw(path) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            return read_raw_f32(f.read())
    except OSError as e:
        raise OSError(f"failed reading raw file {path}: {e}") from e
