"""Reconstruction quality: MSE, PSNR, SSIM and region-wise PSNR"""
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from config import constants
from services.maskgen import SoftMask
from utils.errors import ImageTooSmallError, ShapeMismatchError
from utils.image_io import Image

ArrayLike = Union[Image, SoftMask, np.ndarray]


@dataclass(frozen=True)
class SsimConfig:
    window: int = constants.SSIM_WINDOW
    sigma: float = constants.SSIM_SIGMA
    k1: float = constants.SSIM_K1
    k2: float = constants.SSIM_K2
    data_range: float = constants.SSIM_RANGE

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2

    @property
    def c3(self) -> float:
        return self.c2 / 2.0

    def kernel_1d(self) -> np.ndarray:
        """Normalized 1-D Gaussian; the 2-D window is its outer product"""
        r = np.arange(self.window, dtype=np.float64) - (self.window - 1) / 2.0
        g = np.exp(-(r * r) / (2.0 * self.sigma ** 2))
        return g / g.sum()

    def kernel_2d(self) -> np.ndarray:
        g = self.kernel_1d()
        return np.outer(g, g)


@dataclass(frozen=True)
class RegionReport:
    overall_psnr: float
    hf_psnr: Optional[float]     # None when the region is empty
    lf_psnr: Optional[float]
    hf_pixel_count: int
    lf_pixel_count: int


def _values(x: ArrayLike) -> np.ndarray:
    if isinstance(x, Image):
        return x.pixels
    if isinstance(x, SoftMask):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _same_shape(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape != q.shape:
        raise ShapeMismatchError(f"shapes differ: {p.shape} vs {q.shape}")


def mse(p: ArrayLike, q: ArrayLike) -> float:
    """Mean of (p - q)^2 over every element"""
    a, b = _values(p), _values(q)
    _same_shape(a, b)
    d = a - b
    return float(np.mean(d * d))


def psnr_from_mse(err: float, max_value: float = constants.PSNR_MAX) -> float:
    """10 log10(MAX^2 / mse); math.inf for a perfect match"""
    if not max_value > 0:
        raise ValueError(f"max_value must be positive, got {max_value}")
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / err)


def psnr(p: ArrayLike, q: ArrayLike, max_value: float = constants.PSNR_MAX) -> float:
    return psnr_from_mse(mse(p, q), max_value)


def ssim_map(p: np.ndarray, q: np.ndarray, cfg: SsimConfig) -> np.ndarray:
    """Per-pixel SSIM for one channel (Gaussian window, edge-replicated borders)"""
    g = cfg.kernel_1d()

    def blur(x: np.ndarray) -> np.ndarray:
        x = ndimage.correlate1d(x, g, axis=0, mode="nearest")
        return ndimage.correlate1d(x, g, axis=1, mode="nearest")

    mu_p, mu_q = blur(p), blur(q)
    var_p = blur(p * p) - mu_p * mu_p
    var_q = blur(q * q) - mu_q * mu_q
    cov = blur(p * q) - mu_p * mu_q
    num = (2.0 * mu_p * mu_q + cfg.c1) * (2.0 * cov + cfg.c2)
    den = (mu_p * mu_p + mu_q * mu_q + cfg.c1) * (var_p + var_q + cfg.c2)
    return num / den


def ssim(p: ArrayLike, q: ArrayLike, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean single-scale SSIM over all windows and channels"""
    a, b = _values(p), _values(q)
    _same_shape(a, b)
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    if a.shape[0] < cfg.window or a.shape[1] < cfg.window:
        raise ImageTooSmallError(
            f"SSIM needs at least {cfg.window}x{cfg.window} pixels, got {a.shape[0]}x{a.shape[1]}"
        )
    per_channel = [ssim_map(a[:, :, c], b[:, :, c], cfg).mean() for c in range(a.shape[2])]
    return float(np.mean(per_channel))


def ssim_or_none(p: ArrayLike, q: ArrayLike, cfg: SsimConfig = SsimConfig()) -> Optional[float]:
    """SSIM, or None when the image is smaller than the window"""
    try:
        return ssim(p, q, cfg)
    except ImageTooSmallError:
        return None


def region_psnr(p: ArrayLike, q: ArrayLike, mask: ArrayLike,
                threshold: float = constants.REGION_THRESHOLD) -> RegionReport:
    """PSNR over mask >= threshold (HF) and its complement (LF)"""
    a, b, m = _values(p), _values(q), _values(mask)
    _same_shape(a, b)
    _same_shape(a, m)
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")

    sq = (a - b) ** 2
    hf = m >= threshold
    hf_count = int(hf.sum())
    lf_count = int(hf.size - hf_count)

    def region(sel: np.ndarray, count: int) -> Optional[float]:
        if count == 0:
            return None
        return psnr_from_mse(float(sq[sel].mean()))

    return RegionReport(
        overall_psnr=psnr_from_mse(float(sq.mean())),
        hf_psnr=region(hf, hf_count),
        lf_psnr=region(~hf, lf_count),
        hf_pixel_count=hf_count,
        lf_pixel_count=lf_count,
    )
