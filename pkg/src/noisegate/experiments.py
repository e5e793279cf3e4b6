"""Experiment drivers: intensity sweeps, transform comparison, detection ROC,
and batch attack generation. Every stochastic step derives its seed from the
master seed, so reruns are byte-identical.
"""

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from noisegate.attacks import GaConfig, PgdConfig, ga_attack, pgd_attack
from noisegate.audio import read_wav, write_wav
from noisegate.classifier import Model, predict
from noisegate.detection import RocResult, change_rate, roc
from noisegate.manifests import Manifest, ManifestRow, write_manifest
from noisegate.metrics import (
    EvalRecord,
    MetricsReport,
    acc,
    asr_avg,
    distance_ratio,
    emit_report,
    similarity,
)
from noisegate.recognition import RecognizerSpec, transcribe
from noisegate.seeds import derive_seed
from noisegate.transforms import NoiseSpec, TransformSpec, parse_transform
from noisegate.transforms import apply_transform as _apply

DEFAULT_GRID = (10, 30, 50, 70, 100, 200, 500)
DEFAULT_COMPARISON_TRANSFORMS = (
    "uniform:200",
    "gaussian:200",
    "requant8",
    "lowpass:4000:101",
    "silence:328",
    "downup:2",
    "median:3",
    "quant:256",
    "quant:512",
)
NO_DEFENSE_LABEL = "none"


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    grid: tuple = DEFAULT_GRID
    transforms: tuple = DEFAULT_COMPARISON_TRANSFORMS
    recognizer: RecognizerSpec | None = None
    out_dir: str = "."
    cr_mode: str = "edit"

    def __post_init__(self):
        if not self.grid:
            raise ValueError("intensity grid must be non-empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError(f"grid must be strictly increasing, got {self.grid}")


def _load_rows(manifest: Manifest):
    return [(row, read_wav(manifest.resolve(row))) for row in manifest.rows]


def _require_targets(manifest: Manifest) -> None:
    for row in manifest.rows:
        if row.target is None:
            raise ValueError(f"adversarial manifest row {row.path} has no target label")


def _defended_labels(model: Model, loaded, spec: TransformSpec, master_seed: int, stage: str):
    labels = []
    for idx, (row, clip) in enumerate(loaded):
        seeded = spec.with_seed(derive_seed(master_seed, stage, spec.label, idx))
        labels.append(predict(model, _apply(seeded, clip))[0])
    return labels


def _plain_labels(model: Model, loaded):
    return [predict(model, clip)[0] for row, clip in loaded]


def _records(loaded, adversarial: bool):
    return [
        EvalRecord(path=row.path, true_label=row.label,
                   target_label=row.target if adversarial else None)
        for row, _ in loaded
    ]


def _text_pair_scores(recognizer: RecognizerSpec, loaded, spec: TransformSpec,
                      master_seed: int, stage: str):
    """(mean similarity, mean distance ratio or None) before vs after a transform."""
    sims, ratios = [], []
    for idx, (row, clip) in enumerate(loaded):
        seeded = spec.with_seed(derive_seed(master_seed, stage, spec.label, idx))
        before = transcribe(recognizer, clip)
        after = transcribe(recognizer, _apply(seeded, clip))
        sims.append(similarity(before, after))
        ratio = distance_ratio(row.label, before, after)
        if ratio is not None:
            ratios.append(ratio)
    mean_sim = sum(sims) / len(sims)
    mean_ratio = sum(ratios) / len(ratios) if ratios else None
    return mean_sim, mean_ratio


def _noise_transform(kind: str, intensity: int) -> TransformSpec:
    return TransformSpec(kind=kind, params=(intensity,))


def run_intensity_sweep(cfg: ExperimentConfig, clean_manifest: Manifest,
                        adv_manifest: Manifest, model: Model | None = None,
                        recognizer: RecognizerSpec | None = None) -> MetricsReport:
    """Attack success / accuracy (command mode) or transcript similarity
    (text mode) for both noise kinds over the intensity grid."""
    if (model is None) == (recognizer is None):
        raise ValueError("pass exactly one of model (command mode) or recognizer (text mode)")
    if not clean_manifest.rows or not adv_manifest.rows:
        raise ValueError("both manifests must be non-empty")
    clean = _load_rows(clean_manifest)
    adv = _load_rows(adv_manifest)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if model is not None:
        _require_targets(adv_manifest)
        adv_records = _records(adv, adversarial=True)
        clean_records = _records(clean, adversarial=False)
        report = MetricsReport(columns=["noise_kind", "intensity", "asr_avg", "acc"])
        for kind in ("uniform", "gaussian"):
            for intensity in cfg.grid:
                spec = _noise_transform(kind, intensity)
                report.add_row(
                    kind, intensity,
                    asr_avg(adv_records, _defended_labels(model, adv, spec,
                                                          cfg.master_seed, "sweep-adv")),
                    acc(clean_records, _defended_labels(model, clean, spec,
                                                        cfg.master_seed, "sweep-clean")),
                )
        emit_report(report, out_dir / "sweep_command.csv")
        return report

    report = MetricsReport(
        columns=["noise_kind", "intensity", "sr_benign", "sr_adv",
                 "distance_ratio_benign", "distance_ratio_adv"]
    )
    for kind in ("uniform", "gaussian"):
        for intensity in cfg.grid:
            spec = _noise_transform(kind, intensity)
            sb, rb = _text_pair_scores(recognizer, clean, spec, cfg.master_seed, "sweep-clean")
            sa, ra = _text_pair_scores(recognizer, adv, spec, cfg.master_seed, "sweep-adv")
            report.add_row(kind, intensity, sb, sa, rb, ra)
    emit_report(report, out_dir / "sweep_similarity.csv")
    return report


def run_transform_comparison(cfg: ExperimentConfig, clean_manifest: Manifest,
                             adv_manifest: Manifest, model: Model | None = None,
                             recognizer: RecognizerSpec | None = None) -> MetricsReport:
    """Every configured defense plus a no-defense row."""
    if (model is None) == (recognizer is None):
        raise ValueError("pass exactly one of model (command mode) or recognizer (text mode)")
    if not clean_manifest.rows or not adv_manifest.rows:
        raise ValueError("both manifests must be non-empty")
    clean = _load_rows(clean_manifest)
    adv = _load_rows(adv_manifest)
    specs = [parse_transform(text) for text in cfg.transforms]
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if model is not None:
        _require_targets(adv_manifest)
        adv_records = _records(adv, adversarial=True)
        clean_records = _records(clean, adversarial=False)
        report = MetricsReport(columns=["transform", "asr_avg", "acc"])
        report.add_row(NO_DEFENSE_LABEL,
                       asr_avg(adv_records, _plain_labels(model, adv)),
                       acc(clean_records, _plain_labels(model, clean)))
        for spec in specs:
            report.add_row(
                spec.label,
                asr_avg(adv_records, _defended_labels(model, adv, spec,
                                                      cfg.master_seed, "compare-adv")),
                acc(clean_records, _defended_labels(model, clean, spec,
                                                    cfg.master_seed, "compare-clean")),
            )
        emit_report(report, out_dir / "compare_command.csv")
        return report

    report = MetricsReport(
        columns=["transform", "sr_benign", "sr_adv",
                 "distance_ratio_benign", "distance_ratio_adv"]
    )
    report.add_row(NO_DEFENSE_LABEL, 100.0, 100.0, None, None)
    for spec in specs:
        sb, rb = _text_pair_scores(recognizer, clean, spec, cfg.master_seed, "compare-clean")
        sa, ra = _text_pair_scores(recognizer, adv, spec, cfg.master_seed, "compare-adv")
        report.add_row(spec.label, sb, sa, rb, ra)
    emit_report(report, out_dir / "compare_transforms.csv")
    return report


def run_detection_eval(cfg: ExperimentConfig, clean_manifest: Manifest,
                       adv_manifest: Manifest) -> dict:
    """Change-rate ROC per (noise kind, intensity) cell.

    Writes detection_auc.csv (one row per cell; blank AUC marks a degenerate
    cell where every score is identical) and a per-cell curve CSV of
    (threshold, fpr, tpr) rows with a trailing auc summary line. Returns
    {(kind, intensity): RocResult | None}.
    """
    if cfg.recognizer is None:
        raise ValueError("detection eval needs cfg.recognizer")
    if not clean_manifest.rows or not adv_manifest.rows:
        raise ValueError("both manifests must be non-empty")
    clean = _load_rows(clean_manifest)
    adv = _load_rows(adv_manifest)
    out_dir = Path(cfg.out_dir)
    roc_dir = out_dir / "roc"
    roc_dir.mkdir(parents=True, exist_ok=True)

    summary = MetricsReport(columns=["noise_kind", "intensity", "auc", "youden_threshold"])
    results = {}
    for kind in ("uniform", "gaussian"):
        for intensity in cfg.grid:
            scored = []
            for group, loaded, flag in (("clean", clean, False), ("adv", adv, True)):
                for idx, (row, clip) in enumerate(loaded):
                    noise = NoiseSpec(kind, intensity,
                                      seed=derive_seed(cfg.master_seed, "detect", kind,
                                                       intensity, group, idx))
                    cr, _, _ = change_rate(cfg.recognizer, clip, noise, mode=cfg.cr_mode)
                    scored.append((cr, flag))
            if len({s for s, _ in scored}) == 1:
                results[(kind, intensity)] = None  # noise moved nothing; no curve
                summary.add_row(kind, intensity, None, None)
                continue
            cell = roc(scored)
            results[(kind, intensity)] = cell
            summary.add_row(kind, intensity, cell.auc, cell.youden_threshold)
            _write_roc_curve(cell, roc_dir / f"roc_{kind}_{intensity}.csv")
    emit_report(summary, out_dir / "detection_auc.csv")
    return results


def _write_roc_curve(cell: RocResult, path) -> None:
    lines = ["threshold,fpr,tpr"]
    for threshold, fpr, tpr in cell.points:
        lines.append(f"{threshold:.6f},{fpr:.6f},{tpr:.6f}")
    lines.append(f"auc,{cell.auc:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def pick_targets(model: Model, manifest: Manifest, master_seed: int):
    """A deterministic wrong-label target for every manifest row."""
    targets = []
    for idx, row in enumerate(manifest.rows):
        pool = [lbl for lbl in model.class_labels if lbl != row.label]
        if not pool:
            raise ValueError("model has no alternative label to target")
        rng = np.random.default_rng(derive_seed(master_seed, "target", idx))
        targets.append(pool[int(rng.integers(0, len(pool)))])
    return targets


def attack_manifest(model: Model, manifest: Manifest, kind: str, out_dir,
                    master_seed: int = 0, ga_cfg: GaConfig = GaConfig(),
                    pgd_cfg: PgdConfig = PgdConfig(), targets=None,
                    progress=None):
    """Attack every clip in a clean manifest.

    Writes adversarial WAVs, an adversarial manifest (original label kept,
    target and source recorded), and records.jsonl with one line per attack.
    Returns (results, adversarial manifest of the successful attacks).
    """
    if kind not in ("ga", "pgd"):
        raise ValueError(f"attack kind must be ga or pgd, got {kind!r}")
    out_dir = Path(out_dir)
    (out_dir / "wavs").mkdir(parents=True, exist_ok=True)
    if targets is None:
        targets = pick_targets(model, manifest, master_seed)
    elif isinstance(targets, str):
        targets = [targets] * len(manifest.rows)
    if len(targets) != len(manifest.rows):
        raise ValueError("one target per manifest row required")

    results = []
    adv_rows = []
    record_lines = []
    for idx, (row, target) in enumerate(zip(manifest.rows, targets)):
        clip = read_wav(manifest.resolve(row))
        seed = derive_seed(master_seed, f"attack-{kind}", idx)
        if kind == "ga":
            res = ga_attack(model, clip, target, replace(ga_cfg, seed=seed))
        else:
            res = pgd_attack(model, clip, target, replace(pgd_cfg, seed=seed))
        results.append(res)
        rel = f"wavs/adv_{idx:04d}.wav"
        write_wav(res.adversarial, out_dir / rel)
        if res.success:
            adv_rows.append(ManifestRow(path=rel, label=row.label,
                                        target=target, source=row.path))
        record_lines.append(json.dumps({
            "original": row.path,
            "target": target,
            "success": res.success,
            "iterations": res.iterations_used,
            "distortion_db": round(res.distortion_db, 6)
            if math.isfinite(res.distortion_db) else None,
            "final_score": round(res.final_target_score, 6),
        }, sort_keys=True))
        if progress is not None:
            progress(idx, res)

    (out_dir / "records.jsonl").write_text("\n".join(record_lines) + "\n", encoding="utf-8")
    adv_manifest = Manifest(rows=adv_rows, base_dir=out_dir)
    write_manifest(adv_manifest, out_dir / "manifest.csv", adversarial=True)
    return results, adv_manifest
