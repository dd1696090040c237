"""Neighbor-aware soft mask: max absolute neighbor difference through a shifted sigmoid"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.special import expit

from config import constants
from utils.errors import ImageTooSmallError, MaskConfigError
from utils.image_io import Image

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MaskConfig:
    """Threshold tau, sharpness alpha, neighborhood selector n and padding mode"""
    tau: float = constants.MASK_TAU
    alpha: float = constants.MASK_ALPHA
    n: int = constants.MASK_N
    pad_mode: str = constants.DEFAULT_PAD_MODE

    def __post_init__(self):
        _check_tau_alpha(self.tau, self.alpha)
        if self.n not in constants.NEIGHBORHOODS:
            raise MaskConfigError(f"n must be one of {sorted(constants.NEIGHBORHOODS)}, got {self.n}")
        if self.pad_mode not in constants.PAD_MODES:
            raise MaskConfigError(f"pad_mode must be one of {constants.PAD_MODES}, got {self.pad_mode!r}")


@dataclass(frozen=True)
class DiffMap:
    """Per-pixel, per-channel maximum absolute neighbor difference"""
    values: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class SoftMask:
    """Per-pixel, per-channel weights in (0, 1)"""
    values: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def heatmap(self) -> Image:
        """Channel-max reduction for visualization"""
        return Image(self.values.max(axis=2, keepdims=True))


def _check_tau_alpha(tau: float, alpha: float) -> None:
    if not 0.0 < tau < 1.0:
        raise MaskConfigError(f"tau must lie in (0, 1), got {tau}")
    if not alpha > 0.0:
        raise MaskConfigError(f"alpha must be positive, got {alpha}")


def neighborhood_offsets(n: int) -> List[Tuple[int, int]]:
    """(row, col) offsets of the n-neighborhood; n=12 adds the axial distance-2 pixels"""
    if n not in constants.NEIGHBORHOODS:
        raise MaskConfigError(f"Unsupported neighborhood n={n}")
    return list(constants.NEIGHBORHOODS[n])


def pad_width(n: int) -> int:
    return max(max(abs(dr), abs(dc)) for dr, dc in neighborhood_offsets(n))


def max_neighbor_diff(img: Image, n: int, pad_mode: str = constants.DEFAULT_PAD_MODE) -> DiffMap:
    """Max over the neighborhood of |I_pad(i+dr, j+dc) - I(i, j)|, per channel"""
    offsets = neighborhood_offsets(n)
    if pad_mode not in constants.PAD_MODES:
        raise MaskConfigError(f"Unsupported pad mode {pad_mode!r}")
    p = pad_width(n)
    if img.height < p or img.width < p:
        raise ImageTooSmallError(
            f"Image {img.height}x{img.width} is smaller than pad width {p} required by n={n}"
        )

    padded = np.pad(img.pixels, ((p, p), (p, p), (0, 0)), mode=pad_mode)
    h, w = img.height, img.width
    delta = np.zeros_like(img.pixels)
    for dr, dc in offsets:
        shifted = padded[p + dr:p + dr + h, p + dc:p + dc + w, :]
        np.maximum(delta, np.abs(shifted - img.pixels), out=delta)
    return DiffMap(delta)


def soft_mask(diff: DiffMap, tau: float, alpha: float) -> SoftMask:
    """sigmoid(alpha * (delta - tau)), element-wise"""
    _check_tau_alpha(tau, alpha)
    return SoftMask(expit(alpha * (diff.values - tau)))


def compute_mask(img: Image, cfg: MaskConfig) -> SoftMask:
    """Full soft-mask pipeline for one image"""
    mask = soft_mask(max_neighbor_diff(img, cfg.n, cfg.pad_mode), cfg.tau, cfg.alpha)
    logger.debug(
        "Mask tau=%s alpha=%s n=%s: mean=%.4f, >0.5 fraction=%.4f",
        cfg.tau, cfg.alpha, cfg.n, mask.values.mean(), (mask.values >= 0.5).mean(),
    )
    return mask
