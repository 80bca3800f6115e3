"""Shared fixtures: small image files written on the fly."""

import numpy as np
import png
import pytest
from PIL import Image


@pytest.fixture
def write_png(tmp_path):
    """Write a uint8 or uint16 (H, W), or uint8 (H, W, 3), array as PNG; returns the path."""
    def _write(pixels, name="img.png"):
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.asarray(pixels)).save(path, format="PNG")
        return path
    return _write


@pytest.fixture
def write_pgm(tmp_path):
    """Write a uint8 (H, W) array as binary PGM (P5); returns the path."""
    def _write(pixels, name="img.pgm"):
        arr = np.ascontiguousarray(pixels, dtype=np.uint8)
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
        path.write_bytes(header + arr.tobytes())
        return path
    return _write


@pytest.fixture
def write_png16(tmp_path):
    """Write a uint16 (H, W, C) array as 16-bit PNG; C is 1 (gray), 2, 3 or 4 planes."""
    def _write(pixels, name="img16.png"):
        arr = np.asarray(pixels, dtype=np.uint16)
        height, width, planes = arr.shape
        writer = png.Writer(
            width, height,
            greyscale=planes in (1, 2), alpha=planes in (2, 4), bitdepth=16,
        )
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            writer.write(f, arr.reshape(height, width * planes).tolist())
        return path
    return _write
