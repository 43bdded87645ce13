"""End-to-end pipeline stages behind the CLI.

Every stage reads and writes files under one output root, is deterministic
for a fixed seed, and keeps wall-clock time out of its artifacts so reruns
are byte-identical.
"""

from __future__ import annotations

import hashlib
import os

from . import dataset as ds
from . import mask as mk
from .config import PipelineConfig
from .dpo import dpo_refine, mean_reward
from .imgio import json_compact, load_raw, save_raw
from .metrics import evaluate_pairs, file_sha256, write_report
from .proxy import EncoderParams, ProxyMaps, encode, fit_encoder, make_fit_sample
from .relight import RelightRequest, relight

MANIFEST = "manifest.jsonl"
PAIRS = "pairs.jsonl"
MASK_DIR = "masks"
PRED_DIR = "predictions"
MASK_PARAMS = "mask_params.json"
MASK_LOG = "mask_train_log.json"
ENCODER_PARAMS = "encoder_params.json"
ENCODER_LOG = "encoder_train_log.json"
ENCODER_DPO = "encoder_dpo.json"
DPO_LOG = "dpo_log.json"
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"


def _p(root, *parts):
    return os.path.join(root, *parts)


def load_samples(root):
    samples, _ = ds.read_manifest(_p(root, MANIFEST))
    return {rec.key(): rec for rec in samples}


def load_pairs(root):
    _, pairs = ds.read_manifest(_p(root, PAIRS))
    return pairs


def gbuffer_for_record(root, rec: ds.SampleRecord):
    """Stored G-buffer when complete, otherwise re-rendered from metadata."""
    if all(k in rec.gbuffer_paths for k in ds.GBUFFER_FIELDS):
        return ds.load_gbuffer(root, rec.gbuffer_paths)
    _, gbuf = ds.rerender_record(rec)
    return gbuf


def coverage_for_record(root, rec: ds.SampleRecord):
    if "coverage" in rec.gbuffer_paths:
        return load_raw(_p(root, rec.gbuffer_paths["coverage"]))
    return ds.rerender_record(rec)[1].coverage


def supervised_records(root, samples_by_key):
    """(image, coverage, gt ProxyMaps, key) for each PBR-supervised sample."""
    out = []
    for key in sorted(samples_by_key):
        rec = samples_by_key[key]
        if not rec.has_pbr_supervision:
            continue
        img = ds.load_image(root, rec)
        gbuf = gbuffer_for_record(root, rec)
        out.append((img, gbuf.coverage, ProxyMaps.from_gbuffer(gbuf),
                    "-".join(str(k) for k in key)))
    return out


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_gen(cfg: PipelineConfig, root) -> str:
    path = ds.generate_dataset(cfg.dataset, root)
    samples, _ = ds.read_manifest(path)
    n_sup = sum(r.has_pbr_supervision for r in samples)
    print(f"gen: {len(samples)} samples, {n_sup} supervised -> {path}")
    return path

def stage_pairs(cfg: PipelineConfig, root) -> str:
    samples, _ = ds.read_manifest(_p(root, MANIFEST))
    pairs, skipped = ds.sample_pairs(samples, cfg.pairs_per_view, cfg.seed)
    path = _p(root, PAIRS)
    ds.write_pairs(pairs, path)
    print(f"pairs: {len(pairs)} pairs ({skipped} groups skipped) -> {path}")
    return path


def stage_mask_gt(cfg: PipelineConfig, root) -> str:
    samples = load_samples(root)
    pairs = load_pairs(root)
    os.makedirs(_p(root, MASK_DIR), exist_ok=True)
    for i, pair in enumerate(pairs):
        src, tgt = samples[pair.source], samples[pair.target]
        x_s = ds.load_image(root, src)
        x_t = ds.load_image(root, tgt)
        cov = coverage_for_record(root, src)
        m = mk.gt_mask(x_s, x_t, cfg.mask.alpha, cov, cfg.mask.sigmas)
        rel = os.path.join(MASK_DIR, f"pair_{i:05d}.raw")
        save_raw(_p(root, rel), m)
        pair.mask_path = rel
    ds.write_pairs(pairs, _p(root, PAIRS))
    print(f"mask-gt: {len(pairs)} masks -> {_p(root, MASK_DIR)}")
    return _p(root, MASK_DIR)


def stage_train_mask(cfg: PipelineConfig, root) -> str:
    samples = load_samples(root)
    pairs = [p for p in load_pairs(root) if p.mask_path]
    if not pairs:
        raise ValueError("no ground-truth masks found; run mask-gt first")
    feats, gts = [], []
    for pair in pairs:
        src = samples[pair.source]
        x_s = ds.load_image(root, src)
        gbuf = gbuffer_for_record(root, src)
        feats.append(mk.mask_features(x_s, gbuf.normal, gbuf.coverage, pair.delta,
                                      src.light, src.camera))
        gts.append(load_raw(_p(root, pair.mask_path)))
    params, history = mk.train_mask_predictor(
        feats, gts, cfg.mask.hidden, cfg.mask.lr, cfg.mask.iterations, cfg.seed,
        cfg.mask.max_train_pixels)
    with open(_p(root, MASK_PARAMS), "w", encoding="ascii") as f:
        f.write(json_compact(params.to_json()) + "\n")
    with open(_p(root, MASK_LOG), "w", encoding="ascii") as f:
        f.write(json_compact({"loss": history}) + "\n")
    print(f"train-mask: {len(pairs)} pairs, loss {history[0]:.4f} -> {history[-1]:.4f}")
    return _p(root, MASK_PARAMS)


def stage_fit_proxy(cfg: PipelineConfig, root) -> str:
    samples = load_samples(root)
    sup = supervised_records(root, samples)
    if not sup:
        raise ValueError("manifest has no PBR-supervised records")
    fit_samples = [make_fit_sample(img, gt, cov) for img, cov, gt, _ in sup]
    params, history = fit_encoder(fit_samples, cfg.proxy.lam(), cfg.proxy.hidden,
                                  cfg.proxy.lr, cfg.proxy.iterations, cfg.seed)
    with open(_p(root, ENCODER_PARAMS), "w", encoding="ascii") as f:
        f.write(json_compact(params.to_json()) + "\n")
    with open(_p(root, ENCODER_LOG), "w", encoding="ascii") as f:
        f.write(json_compact({"loss": history}) + "\n")
    print(f"fit-proxy: {len(sup)} supervised records, "
          f"loss {history[0]:.4f} -> {history[-1]:.4f}")
    return _p(root, ENCODER_PARAMS)


def stage_dpo(cfg: PipelineConfig, root) -> str:
    import json
    samples = load_samples(root)
    sup = supervised_records(root, samples)
    with open(_p(root, ENCODER_PARAMS), "r", encoding="ascii") as f:
        params = EncoderParams.from_json(json.load(f))
    before = mean_reward(params, sup)
    refined, log = dpo_refine(params, sup, cfg.dpo)
    after = mean_reward(refined, sup)
    with open(_p(root, ENCODER_DPO), "w", encoding="ascii") as f:
        f.write(json_compact(refined.to_json()) + "\n")
    with open(_p(root, DPO_LOG), "w", encoding="ascii") as f:
        f.write(json_compact({"reward_before": before, "reward_after": after,
                              "iterations": log}) + "\n")
    print(f"dpo: mean reward {before:.4f} -> {after:.4f} over {len(sup)} records")
    return _p(root, ENCODER_DPO)


def _encoder_for_relight(root):
    import json
    for name in (ENCODER_DPO, ENCODER_PARAMS):
        path = _p(root, name)
        if os.path.exists(path):
            with open(path, "r", encoding="ascii") as f:
                return EncoderParams.from_json(json.load(f))
    raise ValueError("no fitted encoder found; run fit-proxy first")


def prediction_name(pair: ds.PairRecord) -> str:
    s, t = pair.source, pair.target
    return f"{s[0]}_v{s[1]}_l{s[2]}_to_l{t[2]}.raw"


def stage_relight(cfg: PipelineConfig, root) -> str:
    samples = load_samples(root)
    pairs = load_pairs(root)
    os.makedirs(_p(root, PRED_DIR), exist_ok=True)
    encoder = _encoder_for_relight(root) if cfg.relight.intrinsics == "proxy" else None
    for pair in pairs:
        src = samples[pair.source]
        x_s = ds.load_image(root, src)
        gbuf = gbuffer_for_record(root, src)
        if cfg.relight.intrinsics == "gbuffer":
            req = RelightRequest(gbuf, src.light, pair.delta, src.camera,
                                 mode=cfg.relight.mode, scene=src.scene,
                                 source_image=x_s)
        else:
            maps = encode(encoder, x_s, gbuf.coverage)
            req = RelightRequest(maps, src.light, pair.delta, src.camera,
                                 mode="local", coverage=gbuf.coverage,
                                 depth=gbuf.depth, source_image=x_s)
        img = relight(req)
        save_raw(_p(root, PRED_DIR, prediction_name(pair)), img)
    print(f"relight: {len(pairs)} predictions ({cfg.relight.intrinsics}, "
          f"{cfg.relight.mode}) -> {_p(root, PRED_DIR)}")
    return _p(root, PRED_DIR)


def stage_eval(cfg: PipelineConfig, root, config_path=None):
    samples = load_samples(root)
    pairs = load_pairs(root)
    entries = []
    for pair in pairs:
        pred_path = _p(root, PRED_DIR, prediction_name(pair))
        if not os.path.exists(pred_path):
            entries.append((pair.variation, None, None,
                            f"missing prediction {prediction_name(pair)}"))
            continue
        pred = load_raw(pred_path)
        target = ds.load_image(root, samples[pair.target])
        entries.append((pair.variation, pred, target))
    manifest_hash = file_sha256(_p(root, MANIFEST))
    config_hash = file_sha256(config_path) if config_path else \
        hashlib.sha256(repr(cfg).encode()).hexdigest()
    report = evaluate_pairs(entries, cfg.eval.exposure, manifest_hash, config_hash)
    write_report(report, _p(root, REPORT_CSV), _p(root, REPORT_JSON))
    for row in report.rows + [report.overall]:
        print(f"eval[{row.variation}]: rmse={row.rmse:.4f} ssim={row.ssim:.4f} "
              f"psnr={row.psnr:.2f} n={row.n_pairs}")
    if report.errors:
        print(f"eval: {len(report.errors)} pairs missing predictions")
    return report


ALL_STAGES = ("gen", "pairs", "mask-gt", "train-mask", "fit-proxy", "dpo",
              "relight", "eval")


def run_full_pipeline(cfg: PipelineConfig, root, config_path=None):
    stage_gen(cfg, root)
    stage_pairs(cfg, root)
    stage_mask_gt(cfg, root)
    stage_train_mask(cfg, root)
    stage_fit_proxy(cfg, root)
    stage_dpo(cfg, root)
    stage_relight(cfg, root)
    return stage_eval(cfg, root, config_path)
