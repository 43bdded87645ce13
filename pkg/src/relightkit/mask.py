"""Lighting-aware soft masks, loss weighting, and the per-pixel mask predictor.

The ground-truth mask marks pixels whose appearance changes under a lighting
edit (shadows, terminators, highlights).  It blends an absolute log-luminance
difference with an exposure-compensated robust distance, then normalizes into
a stable [0,1] map.  A small per-pixel network predicts the mask from source
appearance and the relative-illumination vector when no target image exists.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import xlogy

from .lights import DeltaL, LightParams, apply_delta
from .render import GBuffer

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])   # Rec. 709
LUMA_FLOOR = 1e-6
DEFAULT_ALPHA = 0.7
DEFAULT_SIGMAS = (1.0, 2.0, 4.0)
DEFAULT_GAMMA = 1.0
NORM_PERCENTILE = 99.0


def luminance(img: np.ndarray) -> np.ndarray:
    """Linear luminance, floored at 1e-6 so logs stay finite."""
    return np.maximum(np.asarray(img, dtype=float) @ LUMA_WEIGHTS, LUMA_FLOOR)


def _masked_median(values: np.ndarray, coverage: np.ndarray | None) -> float:
    vals = values if coverage is None else values[coverage > 0]
    if vals.size == 0:
        return 0.0
    return float(np.median(vals))


def robust_distance(y_s: np.ndarray, y_t: np.ndarray,
                    coverage: np.ndarray | None = None,
                    sigmas=DEFAULT_SIGMAS) -> np.ndarray:
    """Exposure-compensated luminance distance, smoothed at several scales.

    |y_t / med(y_t) - y_s / med(y_s)| averaged over Gaussian blurs with the
    given sigmas; medians are taken over the foreground.  A zero median falls
    back to the mean; if both are zero the map is zero.
    """
    if y_s.shape != y_t.shape:
        raise ValueError(f"shape mismatch {y_s.shape} vs {y_t.shape}")

    def norm(y):
        m = _masked_median(y, coverage)
        if m == 0.0:
            sel = y if coverage is None else y[coverage > 0]
            m = float(np.mean(sel)) if sel.size else 0.0
        return None if m == 0.0 else y / m

    rs, rt = norm(y_s), norm(y_t)
    if rs is None and rt is None:
        return np.zeros_like(y_s)
    if rs is None:
        rs = np.zeros_like(y_s)
    if rt is None:
        rt = np.zeros_like(y_t)
    d = np.abs(rt - rs)
    acc = np.zeros_like(d)
    for s in sigmas:
        acc += ndimage.gaussian_filter(d, sigma=s)
    return acc / len(sigmas)


def normalize_mask(raw: np.ndarray, coverage: np.ndarray | None = None) -> np.ndarray:
    """Divide by the 99th foreground percentile and clamp to [0,1]."""
    sel = raw if coverage is None else raw[coverage > 0]
    if sel.size == 0:
        return np.zeros_like(raw)
    p99 = float(np.percentile(sel, NORM_PERCENTILE))
    if p99 < 1e-6:
        return np.zeros_like(raw)
    return np.clip(raw / p99, 0.0, 1.0)


def gt_mask(x_s: np.ndarray, x_t: np.ndarray, alpha: float = DEFAULT_ALPHA,
            coverage: np.ndarray | None = None, sigmas=DEFAULT_SIGMAS) -> np.ndarray:
    """Ground-truth lighting-change mask for a source/target image pair.

    raw = alpha |log Y_t - log Y_s| + (1 - alpha) robust_distance(Y_s, Y_t),
    normalized into [0,1].
    """
    if x_s.shape != x_t.shape:
        raise ValueError(f"shape mismatch {x_s.shape} vs {x_t.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} outside [0,1]")
    y_s, y_t = luminance(x_s), luminance(x_t)
    raw = alpha * np.abs(np.log(y_t) - np.log(y_s))
    raw += (1.0 - alpha) * robust_distance(y_s, y_t, coverage, sigmas)
    return normalize_mask(raw, coverage)


def mask_to_weight(mask: np.ndarray, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Loss weight map W = 1 + gamma * mask (>= 1 everywhere)."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    return 1.0 + gamma * np.asarray(mask, dtype=float)


def weighted_mse(weights: np.ndarray, pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over pixels of W^2 * sum_channels (pred - target)^2.

    The weight multiplies the residual before the squared norm, so it enters
    squared.  W = 1 reduces to the plain channel-summed MSE.
    """
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    sq = (pred - target) ** 2
    if sq.ndim == 3:
        sq = sq.sum(axis=2)
    w = np.asarray(weights, dtype=float)
    if w.shape != sq.shape:
        raise ValueError(f"weight shape {w.shape} does not match residual {sq.shape}")
    return float(np.mean(w * w * sq))


def masked_blend(mask: np.ndarray, base: np.ndarray, full: np.ndarray) -> np.ndarray:
    """Per-element convex combination (1 - m) * base + m * full."""
    base = np.asarray(base, dtype=float)
    full = np.asarray(full, dtype=float)
    if base.shape != full.shape:
        raise ValueError(f"shape mismatch {base.shape} vs {full.shape}")
    m = np.asarray(mask, dtype=float)
    if m.shape != base.shape[:m.ndim]:
        raise ValueError(f"mask shape {m.shape} incompatible with {base.shape}")
    if base.ndim == m.ndim + 1:
        m = m[..., None]
    return (1.0 - m) * base + m * full


# ---------------------------------------------------------------------------
# Mask predictor: k -> hidden -> 1 per-pixel network, tanh hidden, logistic out
# ---------------------------------------------------------------------------

N_MASK_FEATURES = 6


def mask_features(x_s: np.ndarray, normals_cam: np.ndarray, coverage: np.ndarray,
                  delta: DeltaL, source_light: LightParams, camera) -> np.ndarray:
    """Per-pixel features the predictor sees: 6 channels.

    log-luminance; luminance gradient magnitude; diffuse shading change
    |max(0, n.w_t) - max(0, n.w_s)| from the angular edit; |dlogE| and |dtau|
    broadcast; coverage.
    """
    y = luminance(x_s)
    logy = np.log(y)
    gy, gx = np.gradient(y)
    grad = np.sqrt(gx * gx + gy * gy)

    basis = camera.basis()
    w_s = source_light.direction() @ basis
    w_t = apply_delta(source_light, delta, clamp=True).direction() @ basis
    nds = np.clip(normals_cam @ w_s, 0.0, None)
    ndt = np.clip(normals_cam @ w_t, 0.0, None)
    shading_change = np.abs(ndt - nds) * coverage

    h, w = y.shape
    feats = np.empty((h, w, N_MASK_FEATURES))
    feats[:, :, 0] = logy
    feats[:, :, 1] = grad
    feats[:, :, 2] = shading_change
    feats[:, :, 3] = abs(delta.delta_log_e)
    feats[:, :, 4] = abs(delta.delta_tau)
    feats[:, :, 5] = coverage
    return feats


def mask_features_from_gbuffer(x_s, gbuf: GBuffer, delta, source_light, camera):
    return mask_features(x_s, gbuf.normal, gbuf.coverage, delta, source_light, camera)


@dataclass
class MaskPredictorParams:
    w1: np.ndarray   # (k, h)
    b1: np.ndarray   # (h,)
    w2: np.ndarray   # (h, 1)
    b2: np.ndarray   # (1,)

    @classmethod
    def init(cls, n_features: int = N_MASK_FEATURES, hidden: int = 16, seed: int = 0):
        rng = np.random.default_rng([201, seed])
        return cls(rng.normal(0.0, 0.3, (n_features, hidden)), np.zeros(hidden),
                   rng.normal(0.0, 0.3, (hidden, 1)), np.zeros(1))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat(self, theta: np.ndarray) -> "MaskPredictorParams":
        k, h = self.w1.shape
        i = 0
        w1 = theta[i:i + k * h].reshape(k, h); i += k * h
        b1 = theta[i:i + h]; i += h
        w2 = theta[i:i + h].reshape(h, 1); i += h
        b2 = theta[i:i + 1]
        return MaskPredictorParams(w1, b1, w2, b2)

    def to_json(self) -> dict:
        def enc(a):
            return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode()
        return {"schema": "relightkit-mask-predictor/1",
                "n_features": self.w1.shape[0], "hidden": self.w1.shape[1],
                "w1": enc(self.w1), "b1": enc(self.b1),
                "w2": enc(self.w2), "b2": enc(self.b2)}

    @classmethod
    def from_json(cls, obj: dict) -> "MaskPredictorParams":
        k, h = obj["n_features"], obj["hidden"]

        def dec(s, shape):
            return np.frombuffer(base64.b64decode(s), dtype="<f8").reshape(shape).copy()
        return cls(dec(obj["w1"], (k, h)), dec(obj["b1"], (h,)),
                   dec(obj["w2"], (h, 1)), dec(obj["b2"], (1,)))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _mask_forward(params: MaskPredictorParams, feats: np.ndarray):
    x = feats.reshape(-1, feats.shape[-1])
    a1 = np.tanh(x @ params.w1 + params.b1)
    p = _sigmoid(a1 @ params.w2 + params.b2)[:, 0]
    return p, a1, x


def predict_mask(params: MaskPredictorParams, feats: np.ndarray) -> np.ndarray:
    """Apply the per-pixel network; output lies in (0,1)."""
    p, _, _ = _mask_forward(params, feats)
    return p.reshape(feats.shape[:-1])


def bce_dice_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Equal-weight binary cross-entropy + soft Dice loss."""
    return _bce(pred, gt) + _dice(pred, gt)


def _bce(pred, gt) -> float:
    p = np.asarray(pred, dtype=float)
    g = np.asarray(gt, dtype=float)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
    # floor only the log arguments: exact 0 at p == g in {0,1}
    terms = xlogy(g, np.maximum(p, 1e-7)) + xlogy(1.0 - g, np.maximum(1.0 - p, 1e-7))
    return float(-np.mean(terms))


DICE_EPS = 1e-7


def _dice(pred, gt) -> float:
    p = np.asarray(pred, dtype=float).ravel()
    g = np.asarray(gt, dtype=float).ravel()
    inter = float(p @ g)
    denom = float(p @ p + g @ g)
    return 1.0 - (2.0 * inter + DICE_EPS) / (denom + DICE_EPS)


def _bce_dice_grad_wrt_pred(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = p.size
    lo, hi = 1e-7, 1.0
    dbce = np.zeros_like(p)
    inside = (p > lo)
    dbce[inside] -= g[inside] / p[inside]
    inside = (1.0 - p) > lo
    dbce[inside] += (1.0 - g[inside]) / (1.0 - p[inside])
    dbce /= n
    inter = float(p @ g)
    denom = float(p @ p + g @ g) + DICE_EPS
    num = 2.0 * inter + DICE_EPS
    ddice = -(2.0 * g * denom - num * 2.0 * p) / (denom * denom)
    return dbce + ddice


def mask_loss_grad(params: MaskPredictorParams, feats: np.ndarray, gt: np.ndarray):
    """(loss, gradient) of BCE+Dice with respect to all predictor parameters."""
    p, a1, x = _mask_forward(params, feats)
    g = np.asarray(gt, dtype=float).ravel()
    loss = _bce(p, g) + _dice(p, g)
    dp = _bce_dice_grad_wrt_pred(p, g)
    dz2 = dp * p * (1.0 - p)
    gw2 = a1.T @ dz2[:, None]
    gb2 = np.array([dz2.sum()])
    da1 = dz2[:, None] @ params.w2.T
    dz1 = da1 * (1.0 - a1 * a1)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    grad = MaskPredictorParams(gw1, gb1, gw2, gb2)
    return loss, grad


def train_mask_predictor(features_list, gt_masks, hidden: int = 16, lr: float = 0.5,
                         iterations: int = 200, seed: int = 0,
                         max_train_pixels: int | None = 200_000):
    """Full-batch gradient descent with step halving on loss increase.

    The predictor has ~1e2 parameters, so training is capped at
    max_train_pixels rows taken with a fixed stride across all pairs.
    Returns (params, per-iteration loss history); the history is
    nonincreasing by construction.
    """
    if len(features_list) < 1:
        raise ValueError("need at least one training pair")
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    feats = np.concatenate([f.reshape(-1, f.shape[-1]) for f in features_list])
    gt = np.concatenate([np.asarray(m, dtype=float).ravel() for m in gt_masks])
    if max_train_pixels is not None and feats.shape[0] > max_train_pixels:
        stride = -(-feats.shape[0] // max_train_pixels)
        feats = feats[::stride]
        gt = gt[::stride]
    params = MaskPredictorParams.init(feats.shape[-1], hidden, seed)
    loss, grad = mask_loss_grad(params, feats, gt)
    history = [loss]
    step = lr
    for it in range(iterations):
        if not math.isfinite(loss):
            raise RuntimeError(f"mask training diverged at iteration {it}: loss={loss}")
        theta = params.flat() - step * grad.flat()
        cand = params.with_flat(theta)
        new_loss, new_grad = mask_loss_grad(cand, feats, gt)
        if math.isfinite(new_loss) and new_loss <= loss:
            params, loss, grad = cand, new_loss, new_grad
            step *= 1.2
        else:
            step *= 0.5
            if step < 1e-12:
                break
        history.append(loss)
    return params, history
