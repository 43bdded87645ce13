"""Preference-based post-training of the material encoder.

Preference pairs oppose ground-truth intrinsics (preferred) against the
encoder's own current prediction (rejected); the gap is scored by a
physics-based reward and the encoder is updated with a sigmoid-margin
preference loss against a frozen reference copy of itself.  Likelihoods use a
per-channel Gaussian model, the minimal construction that makes the
log-probabilities of a deterministic encoder well-defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .proxy import (EncoderParams, ProxyMaps, _backprop, _bce_mean, _forward,
                    _heads, make_fit_sample)

REWARD_DELTA_FLOOR = 1e-6


@dataclass
class RewardBreakdown:
    albedo_l1: float
    roughness_l1: float
    normal_angular: float    # mean angle in radians
    metallic_bce: float

    @property
    def total(self) -> float:
        return -(self.albedo_l1 + self.roughness_l1 + self.normal_angular
                 + self.metallic_bce)


@dataclass
class PreferencePair:
    """One supervised record with its preferred/rejected intrinsic maps."""
    image: np.ndarray
    coverage: np.ndarray
    y_pos: ProxyMaps         # ground truth
    y_neg: ProxyMaps         # the encoder's own prediction at pair-build time
    key: str = ""


@dataclass
class DpoConfig:
    beta: float = 0.5
    sigma_lik: float = 0.1
    lr: float = 0.05
    iterations: int = 80

    def __post_init__(self):
        for name in ("beta", "sigma_lik", "lr"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


def reward(pred: ProxyMaps, gt: ProxyMaps,
           coverage: np.ndarray | None = None) -> RewardBreakdown:
    """Physical-consistency reward, <= 0, equal to 0 only at a perfect
    prediction with binary metallic."""
    if coverage is None:
        fg = np.ones(pred.albedo.shape[:2], dtype=bool)
    else:
        fg = np.asarray(coverage) > 0
    if not np.any(fg):
        raise ValueError("reward needs a nonempty foreground")
    a = float(np.mean(np.abs(pred.albedo[fg] - gt.albedo[fg])))
    r = float(np.mean(np.abs(pred.roughness[fg] - gt.roughness[fg])))
    dots = np.clip(np.einsum("ij,ij->i", pred.normal[fg], gt.normal[fg]), -1.0, 1.0)
    ang = float(np.mean(np.arccos(dots)))
    m = _bce_mean(pred.metallic[fg], gt.metallic[fg])
    return RewardBreakdown(a, r, ang, m)


def reward_delta(pair: PreferencePair, coverage: np.ndarray | None = None) -> float:
    """r(y_pos) - r(y_neg); nonnegative because y_pos is the ground truth."""
    cov = pair.coverage if coverage is None else coverage
    r_pos = reward(pair.y_pos, pair.y_pos, cov).total
    r_neg = reward(pair.y_neg, pair.y_pos, cov).total
    return r_pos - r_neg


def build_preference_pairs(params: EncoderParams, records) -> list[PreferencePair]:
    """One pair per supervised record; pairs with no reward gap are dropped.

    records: iterable of (image, coverage, gt ProxyMaps, key).
    """
    from .proxy import encode
    pairs = []
    for img, cov, gt, key in records:
        y_neg = encode(params, img, cov)
        pair = PreferencePair(img, cov, gt, y_neg, key)
        if reward_delta(pair) >= REWARD_DELTA_FLOOR:
            pairs.append(pair)
    return pairs


def _log_sigmoid(x: float) -> float:
    return -np.logaddexp(0.0, -x)


def _logp_from_pred(pred8_fg: np.ndarray, y8_fg: np.ndarray, sigma: float) -> float:
    """log p(y | encoder) = -|y - pred|^2 / (2 sigma^2) over foreground channels."""
    d = y8_fg - pred8_fg
    return float(-(d * d).sum() / (2.0 * sigma * sigma))


def _pair_fg_stacks(pair: PreferencePair):
    fg = pair.coverage > 0
    pos = pair.y_pos.channels8()[fg]
    neg = pair.y_neg.channels8()[fg]
    return fg, pos, neg


def dpo_loss(policy: EncoderParams, reference: EncoderParams,
             pair: PreferencePair, cfg: DpoConfig) -> float:
    """-log sigmoid(beta * [(lp_pol(y+) - lp_ref(y+)) - (lp_pol(y-) - lp_ref(y-))])."""
    from .proxy import encode
    fg, pos, neg = _pair_fg_stacks(pair)
    pol = encode(policy, pair.image, pair.coverage).channels8()[fg]
    ref = encode(reference, pair.image, pair.coverage).channels8()[fg]
    s = cfg.sigma_lik
    margin = ((_logp_from_pred(pol, pos, s) - _logp_from_pred(ref, pos, s))
              - (_logp_from_pred(pol, neg, s) - _logp_from_pred(ref, neg, s)))
    loss = -_log_sigmoid(cfg.beta * margin)
    if not math.isfinite(loss):
        raise RuntimeError(f"non-finite preference loss (margin {margin})")
    return float(loss)


def dpo_loss_grad(policy: EncoderParams, reference: EncoderParams,
                  pair: PreferencePair, cfg: DpoConfig):
    """(loss, gradient wrt policy parameters).

    d margin / d pred = (y_pos - y_neg) / sigma^2, then backprop through the
    encoder heads; the reference term is constant in the policy.
    """
    from .proxy import proxy_features
    fg, pos, neg = _pair_fg_stacks(pair)
    feats = proxy_features(pair.image, pair.coverage)[fg]
    z, a1 = _forward(policy, feats)
    albedo, normal, rough, metal = _heads(z)
    pol = np.concatenate([albedo, normal, rough[:, None], metal[:, None]], axis=1)

    from .proxy import encode
    ref = encode(reference, pair.image, pair.coverage).channels8()[fg]
    s = cfg.sigma_lik
    margin = ((_logp_from_pred(pol, pos, s) - _logp_from_pred(ref, pos, s))
              - (_logp_from_pred(pol, neg, s) - _logp_from_pred(ref, neg, s)))
    x = cfg.beta * margin
    loss = -_log_sigmoid(x)
    dl_dmargin = -cfg.beta * float(np.exp(-np.logaddexp(0.0, x)))   # -beta * sigmoid(-x)
    dpred = dl_dmargin * (pos - neg) / (s * s)

    # back through the head squashings
    dz = np.zeros_like(z)
    dz[:, 0:3] = dpred[:, 0:3] * albedo * (1.0 - albedo)
    nraw = z[:, 3:6]
    norms = np.maximum(np.linalg.norm(nraw, axis=1), 1e-12)
    g = dpred[:, 3:6]
    dz[:, 3:6] = (g - np.einsum("ij,ij->i", g, normal)[:, None] * normal) / norms[:, None]
    dz[:, 6] = dpred[:, 6] * rough * (1.0 - rough)
    dz[:, 7] = dpred[:, 7] * metal * (1.0 - metal)
    grad = _backprop(policy, feats, a1, dz)
    return float(loss), grad


def mean_reward(params: EncoderParams, records) -> float:
    return _reward_stats(params, records)[0]


def _reward_stats(params: EncoderParams, records):
    """(mean total reward, mean albedo L1) over supervised records."""
    from .proxy import encode
    totals, albedo = [], []
    for img, cov, gt, _key in records:
        pred = encode(params, img, cov)
        b = reward(pred, gt, cov)
        totals.append(b.total)
        albedo.append(b.albedo_l1)
    return float(np.mean(totals)), float(np.mean(albedo))


def dpo_refine(params: EncoderParams, records, cfg: DpoConfig | None = None):
    """Refine the encoder against a frozen reference copy of itself.

    Preference pairs are rebuilt from the current policy every iteration; a
    step is accepted only if the mean reward over the supervised records does
    not decrease, so the returned encoder is never worse than the input.
    Returns (refined params, log entries {iteration, loss, mean_reward}).
    """
    cfg = cfg or DpoConfig()
    records = list(records)
    if not records:
        raise ValueError("preference refinement needs supervised records")
    reference = params.copy()
    policy = params.copy()
    log = []
    step = cfg.lr
    current_reward, current_albedo = _reward_stats(policy, records)
    for it in range(cfg.iterations):
        pairs = build_preference_pairs(policy, records)
        if not pairs:
            break
        losses = []
        acc = None
        for pair in pairs:
            loss, grad = dpo_loss_grad(policy, reference, pair, cfg)
            losses.append(loss)
            if acc is None:
                acc = grad
            else:
                acc = EncoderParams(acc.w1 + grad.w1, acc.b1 + grad.b1,
                                    acc.w2 + grad.w2, acc.b2 + grad.b2)
        k = float(len(pairs))
        mean_loss = float(np.mean(losses))
        if not math.isfinite(mean_loss):
            raise RuntimeError(f"preference refinement diverged at iteration {it}")
        # reward-gated step: the Gaussian pull can trade albedo error against
        # angular error, so a step must keep the albedo term from regressing
        # as well as improve the total; grow on accept so progress survives
        # the flat tail of the sigmoid margin, halve and retry otherwise
        direction = acc.flat() / k
        accepted = False
        while step >= 1e-12:
            cand = policy.with_flat(policy.flat() - step * direction)
            cand_reward, cand_albedo = _reward_stats(cand, records)
            if (math.isfinite(cand_reward) and cand_reward >= current_reward
                    and cand_albedo <= current_albedo):
                policy, current_reward, current_albedo = cand, cand_reward, cand_albedo
                step = min(step * 2.0, 1e6)
                accepted = True
                break
            step *= 0.5
        log.append({"iteration": it, "loss": mean_loss, "mean_reward": current_reward})
        if not accepted:
            break
    return policy, log


def records_from_samples(samples):
    """Adapt (image, coverage, gt ProxyMaps, key) tuples for encoder fitting."""
    return [make_fit_sample(img, gt, cov) for img, cov, gt, _key in samples]
