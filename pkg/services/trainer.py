"""Two-stage training: mask-weighted loss first, plain MSE second"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from config import constants
from services import net
from services.maskgen import MaskConfig, SoftMask, compute_mask
from services.metrics import RegionReport, psnr, region_psnr, ssim_or_none
from utils.errors import DegenerateMaskError, ShapeMismatchError
from utils.image_io import Image

progress_logger = logging.getLogger(constants.PROGRESS_LOGGER)


@dataclass(frozen=True)
class TrainConfig:
    stage1_epochs: int = constants.STAGE1_EPOCHS
    stage2_epochs: int = constants.STAGE2_EPOCHS
    learning_rate: float = constants.LEARNING_RATE
    hidden_layers: int = constants.HIDDEN_LAYERS
    width: int = constants.WIDTH
    backbone: str = "siren"
    mask: MaskConfig = field(default_factory=MaskConfig)
    seed: int = 0
    eval_every: int = constants.EVAL_EVERY
    omega0: float = constants.OMEGA0
    finer_bias_scale: float = constants.FINER_BIAS_SCALE
    reset_optimizer: bool = False
    region_threshold: float = constants.REGION_THRESHOLD
    progress: bool = False

    def __post_init__(self):
        if self.stage1_epochs < 0 or self.stage2_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.stage1_epochs + self.stage2_epochs < 1:
            raise ValueError("at least one training epoch is required")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.backbone not in constants.BACKBONES:
            raise ValueError(f"backbone must be one of {constants.BACKBONES}, got {self.backbone!r}")

    @property
    def total_epochs(self) -> int:
        return self.stage1_epochs + self.stage2_epochs

    def activation(self) -> net.Activation:
        return net.activation_for(self.backbone, self.omega0)


@dataclass(frozen=True)
class Snapshot:
    epoch: int
    stage: str
    loss: float
    psnr: float
    ssim: Optional[float]


@dataclass(frozen=True)
class FitMetrics:
    psnr: float
    ssim: Optional[float]
    region: Optional[RegionReport]


@dataclass
class TrainResult:
    final_params: net.MlpParams
    reconstruction: Image
    metrics: FitMetrics
    history: List[Snapshot]
    mask: Optional[SoftMask] = None


def _axis(n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    return 2.0 * np.arange(n, dtype=np.float64) / (n - 1) - 1.0


def coord_grid(h: int, w: int) -> np.ndarray:
    """Row-major (y, x) pixel coordinates normalized to [-1, 1]; shape (h*w, 2)"""
    if h < 1 or w < 1:
        raise ValueError(f"grid size must be positive, got {h}x{w}")
    yy, xx = np.meshgrid(_axis(h), _axis(w), indexing="ij")
    return np.stack([yy.reshape(-1), xx.reshape(-1)], axis=1)


def reconstruct(params: net.MlpParams, h: int, w: int) -> Image:
    """Render the network on an h x w grid, clamped to [0, 1]"""
    y = net.forward(params, coord_grid(h, w))
    return Image(np.clip(y, 0.0, 1.0).reshape(h, w, params.out_dim))


def fit(img: Image, cfg: TrainConfig, mask: Optional[SoftMask] = None) -> TrainResult:
    """Fit one image.

    ``mask`` is an optional precomputed soft mask for ``img``. Stage 1 uses it
    (or computes one from ``cfg.mask`` when absent) and region metrics are
    reported against it. With stage1_epochs == 0 no mask is computed here.
    """
    h, w, c = img.shape
    coords = coord_grid(h, w)
    targets = img.pixels.reshape(-1, c)
    full_batch = net.CoordBatch.unweighted(coords, targets)

    hf_batch = None
    if cfg.stage1_epochs > 0:
        if mask is None:
            mask = compute_mask(img, cfg.mask)
        if mask.shape != img.shape:
            raise ShapeMismatchError(f"mask {mask.shape} does not match image {img.shape}")
        weights = mask.values.reshape(-1, c)
        if np.all(weights < constants.DEGENERATE_WEIGHT):
            raise DegenerateMaskError(
                f"every mask weight is below {constants.DEGENERATE_WEIGHT}; "
                f"stage 1 has nothing to fit (tau={cfg.mask.tau}, alpha={cfg.mask.alpha})"
            )
        hf_batch = net.CoordBatch(coords, targets, weights)

    params = net.init_mlp(cfg.hidden_layers, cfg.width, c, cfg.activation(), cfg.seed,
                          cfg.finer_bias_scale)
    state = net.init_adam(params, cfg.learning_rate)

    history: List[Snapshot] = []
    for epoch in range(1, cfg.total_epochs + 1):
        in_stage1 = epoch <= cfg.stage1_epochs
        if epoch == cfg.stage1_epochs + 1 and cfg.stage1_epochs > 0 and cfg.reset_optimizer:
            state = net.init_adam(params, cfg.learning_rate)

        batch = hf_batch if in_stage1 else full_batch
        loss, grads = net.loss_and_grad(params, batch, weighted=in_stage1)
        params, state = net.adam_step(state, params, grads)

        if epoch % cfg.eval_every == 0 or epoch == cfg.total_epochs:
            stage = constants.STAGE_HF if in_stage1 else constants.STAGE_FULL
            recon = reconstruct(params, h, w)
            snap = Snapshot(epoch, stage, loss, psnr(recon, img), ssim_or_none(recon, img))
            history.append(snap)
            if cfg.progress:
                progress_logger.info("epoch=%d stage=%s loss=%.6g psnr=%.4f", epoch, stage, loss, snap.psnr)

    recon = reconstruct(params, h, w)
    region = region_psnr(recon, img, mask, cfg.region_threshold) if mask is not None else None
    metrics = FitMetrics(psnr(recon, img), ssim_or_none(recon, img), region)
    return TrainResult(params, recon, metrics, history, mask)
