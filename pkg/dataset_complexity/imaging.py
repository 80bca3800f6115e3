"""Image decoding and canonical 8-bit grayscale representation.

Every metric operates on a GrayImage: an 8-bit single-channel raster.
PNG (8/16-bit, gray or RGB(A)) and binary PGM (P5) are decoded with Pillow.
16-bit PNGs go through pypng instead, since Pillow drops the low byte of
16-bit color. Color is reduced with BT.601 luma weights and all rounding is half away
from zero so results are bit-reproducible.
"""

import hashlib
import logging
import re
import struct
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np
import png
from PIL import Image, UnidentifiedImageError

from . import config
from .errors import CorruptImage, UnsupportedFormat, ZeroDimension

log = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PGM_SIGNATURE = b"P5"
# bit depth byte within the IHDR chunk
PNG_BIT_DEPTH_OFFSET = 24

PathLike = Union[str, Path]


class ImageFormat(Enum):
    """Formats accepted by load_grayscale."""
    PNG = "PNG"
    PGM = "PGM"


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale raster, pixels stored row-major as a (height, width) array."""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ZeroDimension(f"image size {self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} does not match "
                f"{self.width}x{self.height}"
            )
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {self.pixels.dtype}")
        self.pixels.setflags(write=False)

    @classmethod
    def from_array(cls, values) -> "GrayImage":
        """Build from any 2D array-like of integers in [0, 255]."""
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2D array, got {arr.ndim}D")
        if arr.size == 0:
            raise ZeroDimension(f"image size {arr.shape[1]}x{arr.shape[0]}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)

    @property
    def buffer(self) -> bytes:
        """Row-major pixel bytes."""
        return self.pixels.tobytes(order="C")

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


@dataclass(frozen=True)
class ImageSource:
    """Where an image came from and the digest of its decoded pixels."""
    path: Path
    content_hash: str
    format: ImageFormat


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer, ties away from zero."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(round_half_away(values), 0, 255).astype(np.uint8)


def _sniff_format(path: Path) -> ImageFormat:
    with open(path, "rb") as f:
        head = f.read(len(PNG_SIGNATURE))
    if head.startswith(PNG_SIGNATURE):
        return ImageFormat.PNG
    if head.startswith(PGM_SIGNATURE):
        return ImageFormat.PGM
    raise UnsupportedFormat(f"{path}: not a PNG or binary PGM (P5) file")


def _luma(rgb: np.ndarray) -> np.ndarray:
    r_w, g_w, b_w = config.LUMA_WEIGHTS
    rgb = rgb.astype(np.float64)
    return r_w * rgb[..., 0] + g_w * rgb[..., 1] + b_w * rgb[..., 2]


def _decode_to_gray(im: Image.Image, path: Path) -> np.ndarray:
    """Reduce a decoded Pillow image to a uint8 (H, W) array."""
    mode = im.mode
    if mode == "L":
        return np.asarray(im, dtype=np.uint8)
    if mode == "1":
        return np.asarray(im.convert("L"), dtype=np.uint8)
    if mode == "LA":
        return np.asarray(im.getchannel("L"), dtype=np.uint8)
    if mode in ("P", "PA"):
        im = im.convert("RGB")
        mode = "RGB"
    if mode in ("RGB", "RGBA", "RGBX"):
        rgb = np.asarray(im)[..., :3]
        return _to_uint8(_luma(rgb))
    if mode.startswith("I;16") or mode == "I":
        wide = np.asarray(im).astype(np.float64)
        return _to_uint8(wide / config.SCALE_16_TO_8)
    raise UnsupportedFormat(f"{path}: unsupported pixel mode {mode!r}")


def _png_bit_depth(path: Path) -> int:
    with open(path, "rb") as f:
        head = f.read(PNG_BIT_DEPTH_OFFSET + 1)
    if len(head) <= PNG_BIT_DEPTH_OFFSET:
        return 0
    return head[PNG_BIT_DEPTH_OFFSET]


def _decode_png16(path: Path) -> np.ndarray:
    """Decode a 16-bit PNG keeping full sample depth; luma before the /257 scale."""
    width, height, rows, info = png.Reader(filename=str(path)).read()
    planes = info["planes"]
    wide = np.array([np.asarray(row, dtype=np.float64) for row in rows])
    if wide.size == 0:
        raise ZeroDimension(f"{path}: image has no pixels")
    wide = wide.reshape(height, width, planes)
    gray = wide[..., 0] if info["greyscale"] else _luma(wide[..., :3])
    return _to_uint8(gray / config.SCALE_16_TO_8)


def load_grayscale(path: PathLike) -> GrayImage:
    """Decode a PNG or binary PGM file into canonical 8-bit grayscale.

    Color is converted with 0.299 R + 0.587 G + 0.114 B, 16-bit samples are
    divided by 257; both are rounded half away from zero and clamped to
    [0, 255]. Alpha is ignored.

    Raises:
        FileNotFoundError: path does not exist
        UnsupportedFormat: neither PNG nor P5 PGM
        CorruptImage: decoding failed
        ZeroDimension: decoded image has no pixels
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path}: no such file")
    fmt = _sniff_format(path)
    try:
        if fmt is ImageFormat.PNG and _png_bit_depth(path) == 16:
            log.debug("%s: decoding 16-bit PNG to 8-bit gray", path)
            gray = _decode_png16(path)
        else:
            with Image.open(path) as im:
                im.load()
                log.debug("%s: decoding mode %s to 8-bit gray", path, im.mode)
                gray = _decode_to_gray(im, path)
    except (UnsupportedFormat, ZeroDimension):
        raise
    except (png.Error, zlib.error, UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    if gray.size == 0:
        raise ZeroDimension(f"{path}: image has no pixels")
    return GrayImage(width=gray.shape[1], height=gray.shape[0], pixels=np.ascontiguousarray(gray))


def open_source(path: PathLike) -> tuple[ImageSource, GrayImage]:
    """Load an image and describe its origin."""
    path = Path(path)
    img = load_grayscale(path)
    fmt = _sniff_format(path)
    return ImageSource(path=path, content_hash=content_hash(img), format=fmt), img


def _axis_samples(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source indices and weights for half-pixel-center sampling along one axis."""
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(img: GrayImage, target_w: int, target_h: int) -> GrayImage:
    """Bilinear resize with half-pixel-center mapping.

    Output is rounded half away from zero, so it never leaves the input's
    value range.
    """
    if target_w < 1 or target_h < 1:
        raise ZeroDimension(f"target size {target_w}x{target_h}")
    if (target_w, target_h) == (img.width, img.height):
        return GrayImage(img.width, img.height, img.pixels.copy())

    src = img.pixels.astype(np.float64)
    x0, x1, fx = _axis_samples(img.width, target_w)
    y0, y1, fy = _axis_samples(img.height, target_h)

    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    out = top * (1.0 - fy)[:, None] + bottom * fy[:, None]
    return GrayImage(target_w, target_h, _to_uint8(out))


def content_hash(img: GrayImage) -> str:
    """SHA-256 hex digest of (width u64 LE, height u64 LE, row-major pixels)."""
    digest = hashlib.sha256()
    digest.update(struct.pack("<QQ", img.width, img.height))
    digest.update(img.buffer)
    return digest.hexdigest()


def list_images(root: PathLike) -> list[Path]:
    """All PNG/PGM files under root, sorted lexicographically by path."""
    root = Path(root)
    if root.is_file():
        return [root]
    found = [
        p for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in config.IMAGE_SUFFIXES
    ]
    return sorted(found, key=lambda p: p.as_posix())


_SIZE_RE = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")


def parse_size(text: str) -> tuple[int, int]:
    """Parse "WxH" into (width, height), both >= 1."""
    match = _SIZE_RE.match(text)
    if not match:
        raise ValueError(f"expected WxH, got {text!r}")
    width, height = int(match.group(1)), int(match.group(2))
    if width < 1 or height < 1:
        raise ValueError(f"size must be at least 1x1, got {text!r}")
    return width, height
