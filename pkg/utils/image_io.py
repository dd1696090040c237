"""Image I/O - load, save, convert and resize normalized real-valued images

Images live in memory as H x W x C float64 grids in [0, 1], channel-last and
row-major. PNG and binary PGM/PPM are read through Pillow, except 16-bit
PGM/PPM samples which are decoded straight from the file; output is always
8-bit PNG.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy import ndimage

from config import constants
from utils.errors import ImageFormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_EIGHT_BIT_MODES = {"L", "LA", "RGB", "RGBA", "P", "PA", "1"}
_SIXTEEN_BIT_MODES = {"I;16", "I;16B", "I;16L", "I"}
_READABLE_FORMATS = {"PNG", "PPM"}  # Pillow reports PGM as PPM
_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class Image:
    """H x W x C grid of intensities in [0, 1]"""
    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImageFormatError(f"Image must be H x W x C, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ImageFormatError(f"Image must have 1 or 3 channels, got {arr.shape[2]}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ImageFormatError("Image values must be finite and lie in [0, 1]")
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple:
        return self.pixels.shape

    @property
    def data(self) -> np.ndarray:
        """Flat row-major, channel-last view"""
        return self.pixels.reshape(-1)


def _png_bit_depth(raw: bytes) -> Optional[int]:
    """Bit depth from the IHDR chunk, or None when raw is not a PNG"""
    if raw[:8] != _PNG_SIGNATURE or raw[12:16] != b"IHDR" or len(raw) < 26:
        return None
    return raw[24]


def _pnm_header(raw: bytes) -> Optional[Tuple[bytes, int, int, int, int]]:
    """(magic, width, height, maxval, data offset) of a binary PGM/PPM, else None"""
    if raw[:2] not in (b"P5", b"P6"):
        return None
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM/PPM header")
        tokens.append(raw[start:pos])
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise ImageFormatError(f"malformed PGM/PPM header {tokens}") from e
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise ImageFormatError(f"invalid PGM/PPM header {tokens}")
    return tokens[0], width, height, maxval, pos + 1


def _decode_wide_pnm(raw: bytes, header: Tuple[bytes, int, int, int, int]) -> np.ndarray:
    """Big-endian 16-bit samples of a PGM/PPM with maxval above 255, scaled by maxval"""
    magic, width, height, maxval, offset = header
    channels = 1 if magic == b"P5" else 3
    count = width * height * channels
    if len(raw) - offset < 2 * count:
        raise ImageFormatError(f"PGM/PPM data truncated: expected {count} 16-bit samples")
    samples = np.frombuffer(raw, dtype=">u2", count=count, offset=offset)
    return samples.reshape(height, width, channels).astype(np.float64) / maxval


def load_image(path: PathLike) -> Image:
    """Load a PNG or binary PGM/PPM file as a normalized Image; alpha is dropped

    16-bit PGM/PPM and 16-bit grayscale PNG keep their full depth. 16-bit color
    PNG is rejected, since Pillow only decodes it narrowed to 8 bits.
    """
    path = Path(path)
    raw = path.read_bytes()

    header = _pnm_header(raw)
    if header is not None and header[3] > 255:
        arr = _decode_wide_pnm(raw, header)
        fmt, mode = "PPM", f"{header[0].decode()} maxval={header[3]}"
    else:
        try:
            with PILImage.open(io.BytesIO(raw)) as pil:
                pil.load()
                fmt = pil.format
                mode = pil.mode
                if fmt not in _READABLE_FORMATS:
                    raise ImageFormatError(f"{path}: unsupported format {fmt}")
                if _png_bit_depth(raw) == 16 and mode not in _SIXTEEN_BIT_MODES:
                    raise ImageFormatError(f"{path}: 16-bit {mode} PNG is not supported; "
                                           f"convert it to 8-bit or 16-bit grayscale")

                if mode in _SIXTEEN_BIT_MODES:
                    arr = np.asarray(pil, dtype=np.float64) / 65535.0
                elif mode in _EIGHT_BIT_MODES:
                    if mode == "1":
                        pil = pil.convert("L")
                    elif mode in ("P", "PA"):
                        pil = pil.convert("RGBA")
                    arr = np.asarray(pil, dtype=np.float64) / 255.0
                else:
                    raise ImageFormatError(f"{path}: unsupported color model {mode}")
        except (UnidentifiedImageError, OSError) as e:
            raise ImageFormatError(f"{path}: unreadable image ({e})") from e

    if arr.ndim == 2:
        arr = arr[:, :, None]
    elif arr.shape[2] == 2:      # LA
        arr = arr[:, :, :1]
    elif arr.shape[2] == 4:      # RGBA
        arr = arr[:, :, :3]

    logger.debug("Loaded %s (%s, %s) -> %s", path, fmt, mode, arr.shape)
    return Image(np.clip(arr, 0.0, 1.0))


def quantize(img: Image) -> np.ndarray:
    """Clamp to [0, 1] and round to 8-bit samples"""
    return np.rint(np.clip(img.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(img: Image, path: PathLike) -> None:
    """Write an Image as an 8-bit PNG"""
    samples = quantize(img)
    if img.channels == 1:
        pil = PILImage.fromarray(samples[:, :, 0])
    else:
        pil = PILImage.fromarray(samples)
    pil.save(Path(path), format="PNG")


def to_grayscale(img: Image) -> Image:
    """BT.601 luma; single-channel input passes through unchanged"""
    if img.channels == 1:
        return img
    gray = img.pixels @ np.asarray(constants.GRAY_WEIGHTS, dtype=np.float64)
    return Image(np.clip(gray, 0.0, 1.0)[:, :, None])


def resize(img: Image, new_h: int, new_w: int) -> Image:
    """Bilinear resampling with half-pixel-centered sample coordinates"""
    if new_h < 1 or new_w < 1:
        raise ValueError(f"Target size must be positive, got {new_h}x{new_w}")
    if (new_h, new_w) == (img.height, img.width):
        return Image(img.pixels.copy())

    rows = (np.arange(new_h, dtype=np.float64) + 0.5) * (img.height / new_h) - 0.5
    cols = (np.arange(new_w, dtype=np.float64) + 0.5) * (img.width / new_w) - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")

    # order=1 with mode="nearest" is bilinear with clamped edges
    out = np.stack(
        [ndimage.map_coordinates(img.pixels[:, :, c], [rr, cc], order=1, mode="nearest")
         for c in range(img.channels)],
        axis=-1,
    )
    return Image(np.clip(out, 0.0, 1.0))


def parse_size(text: str) -> tuple:
    """Parse an HxW string such as 256x256"""
    try:
        h, w = (int(part) for part in text.lower().split("x"))
    except ValueError as e:
        raise ValueError(f"Size must look like HxW, got {text!r}") from e
    if h < 1 or w < 1:
        raise ValueError(f"Size must be positive, got {text!r}")
    return h, w
