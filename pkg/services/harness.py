"""Experiment Harness - fit / ablation / eval drivers and CSV reports"""
import glob
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

import config.settings as settings
from config import constants
from services.maskgen import MaskConfig, compute_mask
from services.metrics import psnr, region_psnr, ssim_or_none
from services.trainer import TrainConfig, fit, reconstruct
from utils import checkpoint
from utils.errors import NoInputsError
from utils.image_io import Image, load_image, parse_size, resize, save_image, to_grayscale
from utils.logs import setup_logging

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentSpec:
    inputs: List[str]
    resize: Optional[Tuple[int, int]] = None
    grayscale: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    tau_list: Optional[List[float]] = None
    n_list: Optional[List[int]] = None
    stage1_list: Optional[List[int]] = None
    total_epochs: Optional[int] = None
    out_dir: str = field(default_factory=settings.get_output_dir)
    baseline: bool = False
    workers: int = field(default_factory=settings.get_default_workers)
    upsample: Optional[int] = None
    profile: Optional[str] = None


@dataclass
class ReportRow:
    image: str
    backbone: Optional[str]
    tau: Optional[float]
    alpha: Optional[float]
    n: Optional[int]
    stage1_epochs: Optional[int]
    stage2_epochs: Optional[int]
    seed: Optional[int]
    psnr: float
    ssim: Optional[float]
    hf_psnr: Optional[float]
    lf_psnr: Optional[float]
    wall_seconds: float


@dataclass(frozen=True)
class Job:
    """One fit of one image under one configuration"""
    image_path: str
    image_id: str
    cfg: TrainConfig
    resize: Optional[Tuple[int, int]]
    grayscale: bool
    out_dir: str
    tag: str = ""
    write_artifacts: bool = False
    write_mask: bool = False
    upsample: Optional[int] = None


@dataclass
class JobOutcome:
    job: Job
    row: Optional[ReportRow] = None
    error: Optional[str] = None


@dataclass
class RunSummary:
    rows: List[ReportRow]
    failures: List[str]
    report_path: Optional[Path]

    @property
    def ok(self) -> bool:
        return bool(self.rows)


# ===== SPEC CONSTRUCTION =====

def _merge(base: Dict[str, Any], top: Dict[str, Any]) -> Dict[str, Any]:
    """Merge two spec documents; 'train' and 'mask' merge key-wise"""
    out = dict(base)
    for key, value in top.items():
        if value is None:
            continue
        if key in ("train", "mask"):
            merged = dict(out.get(key) or {})
            merged.update({k: v for k, v in value.items() if v is not None})
            out[key] = merged
        else:
            out[key] = value
    return out


def _profile_doc(name: Optional[str]) -> Dict[str, Any]:
    if not name:
        return {}
    if name not in constants.PROFILES:
        raise ValueError(f"Unknown profile {name!r}; choose from {sorted(constants.PROFILES)}")
    p = constants.PROFILES[name]
    return {
        "profile": name,
        "resize": list(p["resize"]),
        "train": {k: p[k] for k in ("width", "hidden_layers", "stage1_epochs", "stage2_epochs")},
    }


def _parse_resize(value: Any) -> Optional[Tuple[int, int]]:
    if value is None:
        return None
    if isinstance(value, str):
        return parse_size(value)
    h, w = value
    return int(h), int(w)


def spec_from_dict(doc: Dict[str, Any]) -> ExperimentSpec:
    """Build an ExperimentSpec from a JSON-style document

    A top-level 'seed' is shorthand for train.seed; an explicit train.seed wins.
    """
    doc = dict(doc)
    mask = MaskConfig(**(doc.pop("mask", None) or {}))
    train_doc = dict(doc.pop("train", None) or {})
    seed = doc.pop("seed", None)
    if seed is not None and train_doc.get("seed") is None:
        train_doc["seed"] = seed
    train = TrainConfig(**{**train_doc, "mask": mask})
    doc["resize"] = _parse_resize(doc.get("resize"))
    if isinstance(doc.get("inputs"), str):
        doc["inputs"] = [doc["inputs"]]
    known = {f.name for f in fields(ExperimentSpec)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"Unknown experiment keys: {sorted(unknown)}")
    return ExperimentSpec(train=train, **doc)


def spec_to_dict(spec: ExperimentSpec) -> Dict[str, Any]:
    """Inverse of spec_from_dict, used for the config.json written beside each report"""
    doc = asdict(spec)
    doc["mask"] = doc["train"].pop("mask")
    doc["resize"] = list(spec.resize) if spec.resize else None
    return doc


def build_spec(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
    """Profile < JSON config file < CLI overrides"""
    overrides = overrides or {}
    file_doc: Dict[str, Any] = {}
    if config_path:
        file_doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
    profile = overrides.get("profile") or file_doc.get("profile") or settings.get_default_profile()
    doc = _merge(_merge(_profile_doc(profile), file_doc), overrides)
    if "inputs" not in doc:
        doc["inputs"] = []
    return spec_from_dict(doc)


# ===== INPUTS =====

def resolve_inputs(patterns: List[str]) -> List[Path]:
    """Expand files, directories and glob patterns into a sorted, de-duplicated list"""
    found: List[Path] = []
    for pattern in patterns:
        p = Path(pattern)
        if p.is_dir():
            found.extend(sorted(f for f in p.iterdir()
                                if f.is_file() and f.suffix.lower() in constants.SUPPORTED_SUFFIXES))
        elif any(ch in pattern for ch in "*?["):
            found.extend(Path(m) for m in sorted(glob.glob(pattern)) if Path(m).is_file())
        else:
            found.append(p)
    seen, unique = set(), []
    for f in found:
        if f not in seen:
            seen.add(f)
            unique.append(f)
    return unique


def prepare_image(path: Path, size: Optional[Tuple[int, int]], grayscale: bool) -> Image:
    """Load, then optionally convert to grayscale and resize"""
    img = load_image(path)
    if grayscale:
        img = to_grayscale(img)
    if size is not None:
        img = resize(img, *size)
    return img


# ===== JOBS =====

def _artifact_stem(job: Job) -> str:
    return f"{job.image_id}_{job.tag}" if job.tag else job.image_id


def run_job(job: Job) -> JobOutcome:
    """Run one fit; failures are captured, not raised"""
    cfg = job.cfg
    try:
        started = time.perf_counter()
        img = prepare_image(Path(job.image_path), job.resize, job.grayscale)
        mask = compute_mask(img, cfg.mask)
        result = fit(img, cfg, mask)
        wall = time.perf_counter() - started

        out = Path(job.out_dir)
        stem = _artifact_stem(job)
        if job.write_mask:
            save_image(mask.heatmap(), out / f"{job.image_id}_mask.png")
        if job.write_artifacts:
            save_image(result.reconstruction, out / f"{stem}_recon.png")
            checkpoint.save_checkpoint(result.final_params, out / f"{stem}.ckpt")
            if job.upsample and job.upsample > 1:
                k = job.upsample
                hi = reconstruct(result.final_params, img.height * k, img.width * k)
                save_image(hi, out / f"{stem}_recon_x{k}.png")

        region = result.metrics.region
        row = ReportRow(
            image=job.image_id,
            backbone=cfg.backbone,
            tau=cfg.mask.tau,
            alpha=cfg.mask.alpha,
            n=cfg.mask.n,
            stage1_epochs=cfg.stage1_epochs,
            stage2_epochs=cfg.stage2_epochs,
            seed=cfg.seed,
            psnr=result.metrics.psnr,
            ssim=result.metrics.ssim,
            hf_psnr=region.hf_psnr if region else None,
            lf_psnr=region.lf_psnr if region else None,
            wall_seconds=wall,
        )
        logger.info("Finished %s stage1=%d stage2=%d tau=%s n=%d: psnr=%.4f (%.1fs)",
                    stem, cfg.stage1_epochs, cfg.stage2_epochs, cfg.mask.tau, cfg.mask.n,
                    row.psnr, wall)
        return JobOutcome(job, row=row)
    except Exception as e:
        return JobOutcome(job, error=f"{job.image_path}: {e}")


def _init_worker(level: int) -> None:
    setup_logging(logging.getLevelName(level))


def run_jobs(jobs: List[Job], workers: int) -> List[JobOutcome]:
    """Run jobs serially or in a process pool; outcomes keep submission order"""
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(job) for job in jobs]
    level = logging.getLogger().getEffectiveLevel()
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(level,)) as pool:
        return list(pool.map(run_job, jobs))


# ===== REPORTS =====

_KEY_COLUMNS = ["backbone", "tau", "alpha", "n", "stage1_epochs", "stage2_epochs"]
_METRIC_COLUMNS = ["psnr", "ssim", "hf_psnr", "lf_psnr", "wall_seconds"]


def report_frame(rows: List[ReportRow], base_seed: Optional[int], with_means: bool = True) -> pd.DataFrame:
    """Per-run rows followed by one MEAN row per distinct configuration"""
    df = pd.DataFrame([asdict(r) for r in rows], columns=constants.REPORT_COLUMNS)
    if not with_means or df.empty:
        return df
    metrics = df[_METRIC_COLUMNS].astype(float)
    means = (pd.concat([df[_KEY_COLUMNS], metrics], axis=1)
             .groupby(_KEY_COLUMNS, sort=False, dropna=False)[_METRIC_COLUMNS]
             .mean()
             .reset_index())
    means["image"] = constants.MEAN_ROW_ID
    means["seed"] = base_seed
    return pd.concat([df, means[constants.REPORT_COLUMNS]], ignore_index=True)


def write_report(df: pd.DataFrame, out_dir: Path, name: str = constants.REPORT_FILE) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    df.to_csv(path, index=False, na_rep="")
    return path


def _write_config(spec: ExperimentSpec, out_dir: Path, command: str) -> None:
    doc = {"command": command, **spec_to_dict(spec)}
    (out_dir / constants.CONFIG_FILE).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


def _finish(spec: ExperimentSpec, outcomes: List[JobOutcome], command: str) -> RunSummary:
    rows, failures = [], []
    for outcome in outcomes:
        if outcome.row is not None:
            rows.append(outcome.row)
        else:
            logger.warning("Skipped %s", outcome.error)
            failures.append(outcome.error)
    if not rows:
        logger.error("Every run failed; no report written")
        return RunSummary(rows, failures, None)

    out_dir = Path(spec.out_dir)
    path = write_report(report_frame(rows, spec.train.seed), out_dir)
    _write_config(spec, out_dir, command)
    logger.info("Wrote %d rows to %s", len(rows), path)
    return RunSummary(rows, failures, path)


def _inputs_or_raise(spec: ExperimentSpec) -> List[Path]:
    paths = resolve_inputs(spec.inputs)
    if not paths:
        raise NoInputsError(f"No input images found in {spec.inputs}")
    return paths


# ===== DRIVERS =====

def run_fit(spec: ExperimentSpec) -> RunSummary:
    """Fit every input image (plus its stage1=0 twin with --baseline) and write artifacts"""
    paths = _inputs_or_raise(spec)
    Path(spec.out_dir).mkdir(parents=True, exist_ok=True)

    jobs = []
    for idx, path in enumerate(paths):
        cfg = replace(spec.train, seed=spec.train.seed + idx)
        common = dict(image_path=str(path), image_id=path.stem, resize=spec.resize,
                      grayscale=spec.grayscale, out_dir=spec.out_dir, write_artifacts=True,
                      upsample=spec.upsample)
        jobs.append(Job(cfg=cfg, write_mask=True, **common))
        if spec.baseline:
            twin = replace(cfg, stage1_epochs=0)
            jobs.append(Job(cfg=twin, tag="baseline", **common))

    return _finish(spec, run_jobs(jobs, spec.workers), "fit")


def _grid(values: Optional[List[Any]], default: Any, name: str) -> List[Any]:
    if values is None:
        return [default]
    if len(values) == 0:
        raise ValueError(f"{name} grid is empty")
    return list(values)


def ablation_cells(spec: ExperimentSpec) -> List[TrainConfig]:
    """Cartesian product of the tau, n and stage-1 grids; total epochs stay fixed

    With no grid given at all, the full tau x n grid runs.
    """
    base = spec.train
    total = spec.total_epochs if spec.total_epochs is not None else base.total_epochs
    tau_list, n_list = spec.tau_list, spec.n_list
    if tau_list is None and n_list is None and spec.stage1_list is None:
        tau_list, n_list = constants.TAU_GRID, constants.N_GRID
    cells = []
    for tau, n, s1 in product(_grid(tau_list, base.mask.tau, "tau"),
                              _grid(n_list, base.mask.n, "n"),
                              _grid(spec.stage1_list, base.stage1_epochs, "stage1")):
        if s1 > total:
            raise ValueError(f"stage1={s1} exceeds total epochs {total}")
        mask = replace(base.mask, tau=float(tau), n=int(n))
        cells.append(replace(base, mask=mask, stage1_epochs=int(s1), stage2_epochs=total - int(s1)))
    return cells


def run_ablation(spec: ExperimentSpec) -> RunSummary:
    """Every grid cell on every input image; one report, no per-run artifacts

    With --baseline, each image gets one plain-MSE twin per distinct total epoch
    count, under the base mask config; tau and n do not change its training.
    """
    paths = _inputs_or_raise(spec)
    cells = ablation_cells(spec)
    jobs = []
    for idx, path in enumerate(paths):
        common = dict(image_path=str(path), image_id=path.stem, resize=spec.resize,
                      grayscale=spec.grayscale, out_dir=spec.out_dir)
        totals: List[int] = []
        for cell in cells:
            jobs.append(Job(cfg=replace(cell, seed=cell.seed + idx), **common))
            if cell.total_epochs not in totals:
                totals.append(cell.total_epochs)
        if spec.baseline:
            for total in totals:
                twin = replace(spec.train, seed=spec.train.seed + idx, stage1_epochs=0, stage2_epochs=total)
                jobs.append(Job(cfg=twin, tag="baseline", **common))
    logger.info("Ablation: %d cells x %d images = %d runs", len(cells), len(paths), len(jobs))
    return _finish(spec, run_jobs(jobs, spec.workers), "ablate")


def run_eval(recon_path: str, truth_path: str, out_dir: str,
             size: Optional[Tuple[int, int]] = None, grayscale: bool = False,
             mask_cfg: Optional[MaskConfig] = None,
             region_threshold: float = constants.REGION_THRESHOLD) -> ReportRow:
    """Compare a reconstruction with its ground truth; region PSNR when mask_cfg is given"""
    started = time.perf_counter()
    recon = prepare_image(Path(recon_path), size, grayscale)
    truth = prepare_image(Path(truth_path), size, grayscale)

    row = ReportRow(
        image=Path(truth_path).stem, backbone=None, tau=None, alpha=None, n=None,
        stage1_epochs=None, stage2_epochs=None, seed=None,
        psnr=psnr(recon, truth), ssim=ssim_or_none(recon, truth),
        hf_psnr=None, lf_psnr=None, wall_seconds=0.0,
    )
    print(f"PSNR: {row.psnr:.4f} dB")
    print(f"SSIM: {_fmt(row.ssim)}")
    if mask_cfg is not None:
        region = region_psnr(recon, truth, compute_mask(truth, mask_cfg), region_threshold)
        row.tau, row.alpha, row.n = mask_cfg.tau, mask_cfg.alpha, mask_cfg.n
        row.hf_psnr, row.lf_psnr = region.hf_psnr, region.lf_psnr
        print(f"HF PSNR: {_fmt(region.hf_psnr)} dB ({region.hf_pixel_count} elements)")
        print(f"LF PSNR: {_fmt(region.lf_psnr)} dB ({region.lf_pixel_count} elements)")
    row.wall_seconds = time.perf_counter() - started

    write_report(report_frame([row], None, with_means=False), Path(out_dir), constants.EVAL_REPORT_FILE)
    return row


def run_mask(image_path: str, out_dir: str, mask_cfg: MaskConfig,
             size: Optional[Tuple[int, int]] = None, grayscale: bool = False,
             masked: bool = False) -> Path:
    """Write the soft mask heatmap (and optionally image x mask) for one image"""
    path = Path(image_path)
    img = prepare_image(path, size, grayscale)
    mask = compute_mask(img, mask_cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{path.stem}_mask.png"
    save_image(mask.heatmap(), target)
    if masked:
        save_image(Image(img.pixels * mask.values), out / f"{path.stem}_masked.png")
    logger.info("Mask for %s: mean weight %.4f -> %s", path.name, mask.values.mean(), target)
    return target


def _fmt(value: Optional[float]) -> str:
    return "undefined" if value is None else f"{value:.4f}"
