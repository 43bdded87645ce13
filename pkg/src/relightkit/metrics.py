"""Image-quality metrics on the normalized [-1, 1] RGB range.

RMSE, PSNR (peak 2, capped at 99 dB) and single-channel SSIM on luminance
with an 11x11 Gaussian window.  evaluate_suite groups relighting pairs by the
kind of lighting variation (temperature / position / energy / mixed) and
emits CSV + JSON reports with provenance hashes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .imgio import json_compact, srgb_encode

PSNR_CAP_DB = 99.0
PSNR_CAP_RMSE = 2e-5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 2.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])


def normalize_pm1(img: np.ndarray, exposure: float = 1.0) -> np.ndarray:
    """Linear radiance -> sRGB-encoded values mapped linearly onto [-1, 1]."""
    if exposure <= 0.0:
        raise ValueError(f"exposure must be positive, got {exposure}")
    return 2.0 * srgb_encode(np.asarray(img, dtype=float) * exposure) - 1.0


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """20 log10(2 / rmse) on [-1,1] data, capped at 99 dB."""
    r = rmse(a, b)
    if r < PSNR_CAP_RMSE:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 20.0 * math.log10(2.0 / r))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM on luminance; K1=0.01, K2=0.03, L=2."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a = a @ LUMA_WEIGHTS
        b = b @ LUMA_WEIGHTS
    win = _gaussian_window()
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2

    def filt(x):
        return convolve2d(x, win, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class EvalRow:
    variation: str
    rmse: float
    ssim: float
    psnr: float
    n_pairs: int


@dataclass
class EvalReport:
    rows: list                      # per-variation EvalRow, deterministic order
    overall: EvalRow
    manifest_hash: str
    config_hash: str
    errors: list = field(default_factory=list)

    def to_json(self) -> dict:
        def row(r):
            return {"variation": r.variation, "rmse": r.rmse, "ssim": r.ssim,
                    "psnr": r.psnr, "n_pairs": r.n_pairs}
        return {"schema": "relightkit-eval/1",
                "rows": [row(r) for r in self.rows], "overall": row(self.overall),
                "manifest_hash": self.manifest_hash, "config_hash": self.config_hash,
                "errors": list(self.errors)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variation", "rmse", "ssim", "psnr", "n_pairs"])
        for r in self.rows + [self.overall]:
            w.writerow([r.variation, format(r.rmse, ".17g"), format(r.ssim, ".17g"),
                        format(r.psnr, ".17g"), r.n_pairs])
        return buf.getvalue()


VARIATION_ORDER = ("temperature", "position", "energy", "mixed")


def evaluate_pairs(entries, exposure: float = 1.0,
                   manifest_hash: str = "", config_hash: str = "") -> EvalReport:
    """Aggregate per-pair metrics into per-variation and overall rows.

    entries: iterable of (variation, prediction image, target image) in linear
    radiance, or (variation, None, None, error message) for missing pairs.
    """
    per_pair = []
    errors = []
    for entry in entries:
        if len(entry) == 4:
            errors.append(entry[3])
            continue
        variation, pred, target = entry
        p = normalize_pm1(pred, exposure)
        t = normalize_pm1(target, exposure)
        per_pair.append((variation, rmse(p, t), ssim(p, t), psnr(p, t)))
    if not per_pair:
        raise ValueError("no pairs could be evaluated")

    def aggregate(items, name):
        return EvalRow(name,
                       float(np.mean([i[1] for i in items])),
                       float(np.mean([i[2] for i in items])),
                       float(np.mean([i[3] for i in items])),
                       len(items))

    rows = []
    for var in VARIATION_ORDER:
        items = [p for p in per_pair if p[0] == var]
        if items:
            rows.append(aggregate(items, var))
    overall = aggregate(per_pair, "overall")
    return EvalReport(rows, overall, manifest_hash, config_hash, errors)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_report(report: EvalReport, csv_path, json_path) -> None:
    with open(csv_path, "w", encoding="ascii") as f:
        f.write(report.to_csv())
    with open(json_path, "w", encoding="ascii") as f:
        f.write(json_compact(report.to_json()) + "\n")
