"""Few-shot per-pixel material encoder: image features -> 8-channel intrinsics.

The encoder predicts albedo (3), normal (3), roughness and metallic per pixel
from local image features, trained on the sparse supervised subset with an
L1 / unit-normal / L1 / BCE composite loss.  Channel squashings keep every
prediction inside its physical range regardless of parameter values.
"""

from __future__ import annotations

import base64
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import xlogy

from .mask import luminance
from .render import GBuffer

N_PROXY_FEATURES = 9
DEFAULT_LAMBDA = (1.0, 1.0, 0.5, 0.5)   # albedo, normal, roughness, metallic


@dataclass
class ProxyMaps:
    """Predicted (or ground-truth) intrinsics: 8 channels total."""
    albedo: np.ndarray      # H x W x 3, [0,1]
    normal: np.ndarray      # H x W x 3, unit on foreground
    roughness: np.ndarray   # H x W, [0,1]
    metallic: np.ndarray    # H x W, [0,1]

    @classmethod
    def from_gbuffer(cls, g: GBuffer) -> "ProxyMaps":
        return cls(g.albedo.copy(), g.normal.copy(), g.roughness.copy(),
                   g.metallic.copy())

    def channels8(self) -> np.ndarray:
        return np.concatenate([self.albedo, self.normal,
                               self.roughness[:, :, None],
                               self.metallic[:, :, None]], axis=2)

    @classmethod
    def from_channels8(cls, c: np.ndarray) -> "ProxyMaps":
        return cls(c[:, :, 0:3].copy(), c[:, :, 3:6].copy(),
                   c[:, :, 6].copy(), c[:, :, 7].copy())


def normalize_normals(raw: np.ndarray) -> np.ndarray:
    """Scale each vector to unit norm; zero vectors become (0,0,1) with a warning."""
    raw = np.asarray(raw, dtype=float)
    flat = raw.reshape(-1, 3)
    norms = np.linalg.norm(flat, axis=1)
    zero = norms < 1e-12
    n_zero = int(zero.sum())
    out = np.empty_like(flat)
    out[~zero] = flat[~zero] / norms[~zero, None]
    out[zero] = (0.0, 0.0, 1.0)
    if n_zero:
        warnings.warn(f"normalize_normals replaced {n_zero} zero vectors with (0,0,1)")
    return out.reshape(raw.shape)


def _bce_mean(pred, gt) -> float:
    terms = xlogy(gt, np.maximum(pred, 1e-7)) + xlogy(1.0 - gt, np.maximum(1.0 - pred, 1e-7))
    return float(-np.mean(terms))


def proxy_loss(pred: ProxyMaps, gt: ProxyMaps, lam=DEFAULT_LAMBDA,
               coverage: np.ndarray | None = None):
    """Composite intrinsics loss, each term averaged over foreground pixels.

    lam_a |a - a^|_1 + lam_n (1 - <n, n^>) + lam_r |r - r^|_1 + lam_m BCE(m, m^)

    Returns (total, breakdown dict).
    """
    if pred.albedo.shape != gt.albedo.shape:
        raise ValueError(f"shape mismatch {pred.albedo.shape} vs {gt.albedo.shape}")
    if coverage is None:
        fg = np.ones(pred.albedo.shape[:2], dtype=bool)
    else:
        fg = np.asarray(coverage) > 0
    if not np.any(fg):
        raise ValueError("proxy loss needs a nonempty foreground")
    la, ln, lr, lm = lam
    a_term = float(np.mean(np.abs(pred.albedo[fg] - gt.albedo[fg])))
    n_term = float(np.mean(1.0 - np.einsum("ij,ij->i", pred.normal[fg], gt.normal[fg])))
    r_term = float(np.mean(np.abs(pred.roughness[fg] - gt.roughness[fg])))
    m_term = _bce_mean(pred.metallic[fg], gt.metallic[fg])
    breakdown = {"albedo_l1": a_term, "normal": n_term,
                 "roughness_l1": r_term, "metallic_bce": m_term}
    total = la * a_term + ln * n_term + lr * r_term + lm * m_term
    return total, breakdown


# ---------------------------------------------------------------------------
# Feature stack
# ---------------------------------------------------------------------------

def proxy_features(img: np.ndarray, coverage: np.ndarray | None = None) -> np.ndarray:
    """9 per-pixel features: log-luminance, 2 chromaticities, 2 Sobel
    gradients of log-luminance, signed image coordinates and radius, coverage.

    The signed coordinates are what makes per-pixel normal regression
    possible at all; gradients alone carry no left/right information.
    """
    img = np.asarray(img, dtype=float)
    h, w = img.shape[:2]
    if coverage is None:
        coverage = np.ones((h, w))
    y = luminance(img)
    logy = np.log(y)
    total = img.sum(axis=2)
    safe = np.maximum(total, 1e-9)
    chroma_r = img[:, :, 0] / safe
    chroma_g = img[:, :, 1] / safe

    sx_ly = ndimage.sobel(logy, axis=1, mode="nearest")
    sy_ly = ndimage.sobel(logy, axis=0, mode="nearest")

    yy, xx = np.meshgrid(2.0 * (np.arange(h) + 0.5) / h - 1.0,
                         2.0 * (np.arange(w) + 0.5) / w - 1.0, indexing="ij")
    radial = np.sqrt(xx * xx + yy * yy) / math.sqrt(2.0)

    feats = np.stack([logy, chroma_r, chroma_g, sx_ly, sy_ly, xx, yy,
                      radial, coverage], axis=2)
    return feats


# ---------------------------------------------------------------------------
# Encoder parameters and forward pass
# ---------------------------------------------------------------------------

@dataclass
class EncoderParams:
    w1: np.ndarray   # (k, h)
    b1: np.ndarray   # (h,)
    w2: np.ndarray   # (h, 8)
    b2: np.ndarray   # (8,)

    @classmethod
    def init(cls, n_features: int = N_PROXY_FEATURES, hidden: int = 24, seed: int = 0):
        rng = np.random.default_rng([301, seed])
        return cls(rng.normal(0.0, 0.3, (n_features, hidden)), np.zeros(hidden),
                   rng.normal(0.0, 0.3, (hidden, 8)), np.zeros(8))

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.w1.copy(), self.b1.copy(),
                             self.w2.copy(), self.b2.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat(self, theta: np.ndarray) -> "EncoderParams":
        k, h = self.w1.shape
        i = 0
        w1 = theta[i:i + k * h].reshape(k, h); i += k * h
        b1 = theta[i:i + h]; i += h
        w2 = theta[i:i + h * 8].reshape(h, 8); i += h * 8
        b2 = theta[i:i + 8]
        return EncoderParams(w1, b1, w2, b2)

    def to_json(self) -> dict:
        def enc(a):
            return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode()
        return {"schema": "relightkit-proxy-encoder/1",
                "n_features": self.w1.shape[0], "hidden": self.w1.shape[1],
                "w1": enc(self.w1), "b1": enc(self.b1),
                "w2": enc(self.w2), "b2": enc(self.b2)}

    @classmethod
    def from_json(cls, obj: dict) -> "EncoderParams":
        k, h = obj["n_features"], obj["hidden"]

        def dec(s, shape):
            return np.frombuffer(base64.b64decode(s), dtype="<f8").reshape(shape).copy()
        return cls(dec(obj["w1"], (k, h)), dec(obj["b1"], (h,)),
                   dec(obj["w2"], (h, 8)), dec(obj["b2"], (8,)))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _forward(params: EncoderParams, x: np.ndarray):
    """x: (N, k) features -> raw z (N, 8) plus hidden activations."""
    a1 = np.tanh(x @ params.w1 + params.b1)
    z = a1 @ params.w2 + params.b2
    return z, a1


def _heads(z: np.ndarray):
    """Raw 8 outputs -> (albedo, normal, roughness, metallic) with squashings."""
    albedo = _sigmoid(z[:, 0:3])
    nraw = z[:, 3:6]
    norms = np.linalg.norm(nraw, axis=1)
    zero = norms < 1e-12
    normal = np.empty_like(nraw)
    normal[~zero] = nraw[~zero] / norms[~zero, None]
    normal[zero] = (0.0, 0.0, 1.0)
    rough = _sigmoid(z[:, 6])
    metal = _sigmoid(z[:, 7])
    return albedo, normal, rough, metal


def encode(params: EncoderParams, img: np.ndarray,
           coverage: np.ndarray | None = None) -> ProxyMaps:
    """Predict intrinsics for an image; background emits zeros."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape[:2]
    if coverage is None:
        coverage = np.ones((h, w))
    feats = proxy_features(img, coverage)
    fg = coverage > 0
    z, _ = _forward(params, feats[fg])
    if not np.all(np.isfinite(z)):
        bad = np.argwhere(~np.isfinite(z))[0]
        raise RuntimeError(f"non-finite encoder activation at foreground pixel {bad[0]}")
    albedo, normal, rough, metal = _heads(z)
    maps = ProxyMaps(np.zeros((h, w, 3)), np.zeros((h, w, 3)),
                     np.zeros((h, w)), np.zeros((h, w)))
    maps.albedo[fg] = albedo
    maps.normal[fg] = normal
    maps.roughness[fg] = rough
    maps.metallic[fg] = metal
    return maps


def _loss_grad_z(z: np.ndarray, gt_a, gt_n, gt_r, gt_m, lam):
    """Loss and gradient with respect to the raw head inputs z (N, 8)."""
    la, ln, lr, lm = lam
    n = z.shape[0]
    albedo, normal, rough, metal = _heads(z)

    a_term = float(np.mean(np.abs(albedo - gt_a)))
    n_term = float(np.mean(1.0 - np.einsum("ij,ij->i", normal, gt_n)))
    r_term = float(np.mean(np.abs(rough - gt_r)))
    m_term = _bce_mean(metal, gt_m)
    loss = la * a_term + ln * n_term + lr * r_term + lm * m_term

    dz = np.zeros_like(z)
    dz[:, 0:3] = la * np.sign(albedo - gt_a) / (3.0 * n) * albedo * (1.0 - albedo)
    nraw = z[:, 3:6]
    norms = np.maximum(np.linalg.norm(nraw, axis=1), 1e-12)
    proj = gt_n - np.einsum("ij,ij->i", gt_n, normal)[:, None] * normal
    dz[:, 3:6] = -ln / n * proj / norms[:, None]
    dz[:, 6] = lr * np.sign(rough - gt_r) / n * rough * (1.0 - rough)
    dz[:, 7] = lm * (metal - gt_m) / n
    return loss, dz


def _backprop(params: EncoderParams, x: np.ndarray, a1: np.ndarray, dz: np.ndarray):
    gw2 = a1.T @ dz
    gb2 = dz.sum(axis=0)
    da1 = dz @ params.w2.T
    dz1 = da1 * (1.0 - a1 * a1)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return EncoderParams(gw1, gb1, gw2, gb2)


def encoder_loss_grad(params: EncoderParams, samples, lam=DEFAULT_LAMBDA):
    """Mean proxy loss over samples and its parameter gradient.

    Each sample is (features_fg (N,9), gt_albedo, gt_normal, gt_rough, gt_metal),
    foreground pixels only.
    """
    total = 0.0
    acc = None
    for x, gt_a, gt_n, gt_r, gt_m in samples:
        z, a1 = _forward(params, x)
        loss, dz = _loss_grad_z(z, gt_a, gt_n, gt_r, gt_m, lam)
        g = _backprop(params, x, a1, dz)
        total += loss
        if acc is None:
            acc = g
        else:
            acc = EncoderParams(acc.w1 + g.w1, acc.b1 + g.b1,
                                acc.w2 + g.w2, acc.b2 + g.b2)
    k = float(len(samples))
    acc = EncoderParams(acc.w1 / k, acc.b1 / k, acc.w2 / k, acc.b2 / k)
    return total / k, acc


def make_fit_sample(img: np.ndarray, gt: ProxyMaps, coverage: np.ndarray):
    """Flatten a supervised record into the tuple encoder_loss_grad expects."""
    fg = np.asarray(coverage) > 0
    if not np.any(fg):
        raise ValueError("supervised record has empty foreground")
    feats = proxy_features(img, coverage)
    return (feats[fg], gt.albedo[fg], gt.normal[fg], gt.roughness[fg], gt.metallic[fg])


def fit_encoder(samples, lam=DEFAULT_LAMBDA, hidden: int = 24, lr: float = 0.2,
                iterations: int = 300, seed: int = 0,
                init: EncoderParams | None = None):
    """Gradient descent on the mean intrinsics loss; step halves on increase.

    Returns (params, loss history); diverging loss aborts with diagnostics.
    """
    if len(samples) < 1:
        raise ValueError("need at least one supervised sample")
    params = init.copy() if init is not None else EncoderParams.init(
        N_PROXY_FEATURES, hidden, seed)
    loss, grad = encoder_loss_grad(params, samples, lam)
    history = [loss]
    step = lr
    for it in range(iterations):
        if not math.isfinite(loss) or loss > 1e3:
            raise RuntimeError(f"encoder fit diverged at iteration {it}: loss={loss}")
        theta = params.flat() - step * grad.flat()
        cand = params.with_flat(theta)
        new_loss, new_grad = encoder_loss_grad(cand, samples, lam)
        if math.isfinite(new_loss) and new_loss <= loss:
            params, loss, grad = cand, new_loss, new_grad
            step *= 1.2
        else:
            step *= 0.5
            if step < 1e-12:
                break
        history.append(loss)
    return params, history


PROXY_FIELDS = ("albedo", "normal", "roughness", "metallic")


def save_proxy_maps(maps: ProxyMaps, root, prefix) -> dict:
    """Write the four channel planes in the same raw layout the G-buffer uses,
    so metrics and relighting consume either interchangeably."""
    import os

    from .imgio import save_raw
    paths = {}
    for name in PROXY_FIELDS:
        rel = f"{prefix}_{name}.raw"
        save_raw(os.path.join(root, rel), getattr(maps, name))
        paths[name] = rel
    return paths


def load_proxy_maps(root, paths: dict) -> ProxyMaps:
    import os

    from .imgio import load_raw
    return ProxyMaps(**{name: load_raw(os.path.join(root, paths[name]))
                        for name in PROXY_FIELDS})


def pool_project(maps: ProxyMaps, proj: np.ndarray, bias: np.ndarray | None = None,
                 coverage: np.ndarray | None = None) -> np.ndarray:
    """Coverage-weighted mean of the 8 channels, then an affine projection."""
    c8 = maps.channels8()
    if coverage is None:
        fg = np.ones(c8.shape[:2], dtype=bool)
    else:
        fg = np.asarray(coverage) > 0
    if not np.any(fg):
        raise ValueError("pooling needs a nonempty foreground")
    pooled = c8[fg].mean(axis=0)
    proj = np.asarray(proj, dtype=float)
    if proj.ndim != 2 or proj.shape[1] != 8:
        raise ValueError(f"projection must have shape (d_token, 8), got {proj.shape}")
    if bias is None:
        bias = np.zeros(proj.shape[0])
    return proj @ pooled + np.asarray(bias, dtype=float)
