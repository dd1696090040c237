import numpy as np
import pytest
from PIL import Image as PILImage

from utils.image_io import Image


def write_png(path, samples):
    """Write uint8 samples (H x W or H x W x C) as a PNG"""
    PILImage.fromarray(np.asarray(samples, dtype=np.uint8)).save(path, format="PNG")
    return path


def composite_image(size=64):
    """Grayscale test card: checkerboard, ramp, disk edge and flat quadrants"""
    half = size // 2
    img = np.zeros((size, size))
    yy, xx = np.mgrid[0:half, 0:half]
    img[:half, :half] = ((yy // 4 + xx // 4) % 2).astype(float)
    img[:half, half:] = np.tile(np.linspace(0.0, 1.0, half), (half, 1))
    disk = (yy - half / 2) ** 2 + (xx - half / 2) ** 2 <= (half / 3) ** 2
    img[half:, :half] = np.where(disk, 0.9, 0.1)
    img[half:, half:] = 0.5
    return Image(img)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def png_dir(tmp_path, rng):
    """Directory with three 16x16 RGB PNGs"""
    d = tmp_path / "images"
    d.mkdir()
    for i in range(3):
        write_png(d / f"img{i}.png", rng.integers(0, 256, size=(16, 16, 3)))
    return d
