"""Per-image complexity measures.

Three entropies, all in bits (log base 2, 0·log 0 := 0):
  - Shannon entropy of the gray-level histogram
  - GLCM entropy of the gray-level co-occurrence matrix at offset (d, θ)
  - Delentropy: half the entropy of the deledensity, the joint histogram of
    (dx, dy) gradient pairs
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__, config
from .errors import ImageTooSmall, OffsetTooLarge
from .imaging import GrayImage, content_hash, resize_bilinear, round_half_away

# (Δw, Δh) per unit distance; image rows grow downward, so "up" is Δh < 0
GLCM_DIRECTIONS: dict[int, tuple[int, int]] = {
    0: (1, 0),
    45: (1, -1),
    90: (0, -1),
    135: (-1, -1),
}


# =============================================================================
# Domain types
# =============================================================================

@dataclass(frozen=True, eq=False)
class GradientField:
    """dx/dy samples on the kernel's valid grid, shape (grid_h, grid_w)."""
    dx: np.ndarray
    dy: np.ndarray
    grid_w: int
    grid_h: int

    def __post_init__(self):
        shape = (self.grid_h, self.grid_w)
        if self.dx.shape != shape or self.dy.shape != shape:
            raise ValueError(f"gradient arrays must have shape {shape}")
        limit = config.GRADIENT_MAX
        if np.abs(self.dx).max(initial=0) > limit or np.abs(self.dy).max(initial=0) > limit:
            raise ValueError(f"gradient components must lie in [-{limit}, {limit}]")


@dataclass(frozen=True, eq=False)
class Deledensity:
    """Joint probability of rounded (dx, dy); bins[dx + 255, dy + 255]."""
    bins: np.ndarray
    sample_count: int
    bin_range: tuple[int, int] = (-config.GRADIENT_MAX, config.GRADIENT_MAX)

    def __post_init__(self):
        _check_probabilities(self.bins)

    def probability(self, dx: int, dy: int) -> float:
        lo, hi = self.bin_range
        if not (lo <= dx <= hi and lo <= dy <= hi):
            return 0.0
        return float(self.bins[dx - lo, dy - lo])


@dataclass(frozen=True, eq=False)
class GlcmMatrix:
    """Gray-level pair probabilities, probs[i, j] for reference i and neighbour j."""
    probs: np.ndarray
    distance: int
    angle: int
    symmetric: bool

    def __post_init__(self):
        _check_probabilities(self.probs)
        if self.symmetric and not np.array_equal(self.probs, self.probs.T):
            raise ValueError("symmetric GLCM is not symmetric")


@dataclass(frozen=True)
class MetricParams:
    """Knobs that change metric values; part of every cache key."""
    kernel: str = config.DEFAULT_KERNEL
    glcm_distance: int = config.GLCM_DISTANCE
    glcm_angle: int = config.GLCM_ANGLE
    glcm_symmetric: bool = config.GLCM_SYMMETRIC
    resize: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.kernel not in config.KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}, expected one of {config.KERNELS}")
        if self.glcm_angle not in GLCM_DIRECTIONS:
            raise ValueError(f"GLCM angle must be one of {sorted(GLCM_DIRECTIONS)}")
        if self.glcm_distance < 1:
            raise ValueError("GLCM distance must be >= 1")
        if self.resize is not None and min(self.resize) < 1:
            raise ValueError("resize dimensions must be >= 1")

    def fingerprint(self) -> str:
        """Short digest of the canonical parameter JSON."""
        payload = asdict(self)
        payload["resize"] = list(self.resize) if self.resize else None
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def tool_version(self) -> str:
        return f"{__version__}+{self.fingerprint()}"


@dataclass(frozen=True)
class ComplexityRecord:
    """All three metrics for one image, keyed by its content hash."""
    content_hash: str
    shannon_bits: float
    glcm_bits: float
    delentropy_bits: float
    width: int
    height: int
    tool_version: str
    schema: str = field(default=config.RECORD_SCHEMA)

    def __post_init__(self):
        for name in ("shannon_bits", "glcm_bits", "delentropy_bits"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite value >= 0, got {value}")

    def value(self, metric: str) -> float:
        """Metric value by name: shannon, glcm or delentropy."""
        try:
            return {
                "shannon": self.shannon_bits,
                "glcm": self.glcm_bits,
                "delentropy": self.delentropy_bits,
            }[metric]
        except KeyError:
            raise ValueError(f"unknown metric {metric!r}, expected one of {config.METRICS}") from None

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "contentHash": self.content_hash,
            "shannonBits": self.shannon_bits,
            "glcmBits": self.glcm_bits,
            "delentropyBits": self.delentropy_bits,
            "width": self.width,
            "height": self.height,
            "toolVersion": self.tool_version,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComplexityRecord":
        return cls(
            content_hash=str(data["contentHash"]),
            shannon_bits=float(data["shannonBits"]),
            glcm_bits=float(data["glcmBits"]),
            delentropy_bits=float(data["delentropyBits"]),
            width=int(data["width"]),
            height=int(data["height"]),
            tool_version=str(data["toolVersion"]),
            schema=str(data.get("schema", config.RECORD_SCHEMA)),
        )


# =============================================================================
# Helpers
# =============================================================================

def _check_probabilities(p: np.ndarray) -> None:
    if (p < 0).any():
        raise ValueError("probabilities must be >= 0")
    total = float(p.sum())
    if abs(total - 1.0) > config.PROBABILITY_SUM_TOL:
        raise ValueError(f"probabilities sum to {total!r}, expected 1")


def entropy_bits(p: np.ndarray) -> float:
    """-Σ p log2 p over a probability table, zero cells skipped.

    math.fsum makes the sum exactly rounded, hence independent of term order.
    """
    nz = p[p > 0].ravel()
    total = math.fsum((nz * np.log2(nz)).tolist())
    return 0.0 if total == 0 else -total


# =============================================================================
# Shannon entropy
# =============================================================================

def gray_histogram(img: GrayImage) -> np.ndarray:
    """Counts of each of the 256 gray levels."""
    return np.bincount(img.pixels.ravel(), minlength=config.GRAY_LEVELS)


def shannon_entropy(img: GrayImage) -> float:
    """Entropy of the gray-level distribution, in [0, 8] bits."""
    counts = gray_histogram(img)
    return entropy_bits(counts / counts.sum())


# =============================================================================
# GLCM entropy
# =============================================================================

def glcm(
    img: GrayImage,
    distance: int = config.GLCM_DISTANCE,
    angle: int = config.GLCM_ANGLE,
    symmetric: bool = config.GLCM_SYMMETRIC,
) -> GlcmMatrix:
    """Co-occurrence probabilities of (I(w, h), I(w + Δw, h + Δh)).

    (Δw, Δh) is distance × the unit direction of angle: 0° → (d, 0),
    45° → (d, -d), 90° → (0, -d), 135° → (-d, -d). With symmetric=True each
    pair also counts reversed.

    Raises:
        OffsetTooLarge: no pixel pair fits inside the image
    """
    if distance < 1:
        raise ValueError("GLCM distance must be >= 1")
    if angle not in GLCM_DIRECTIONS:
        raise ValueError(f"GLCM angle must be one of {sorted(GLCM_DIRECTIONS)}")

    ux, uy = GLCM_DIRECTIONS[angle]
    dw, dh = ux * distance, uy * distance
    w0, w1 = max(0, -dw), img.width - max(0, dw)
    h0, h1 = max(0, -dh), img.height - max(0, dh)
    if w1 <= w0 or h1 <= h0:
        raise OffsetTooLarge(
            f"offset ({dw}, {dh}) leaves no pixel pair in a {img.width}x{img.height} image"
        )

    pixels = img.pixels.astype(np.intp)
    ref = pixels[h0:h1, w0:w1]
    nbr = pixels[h0 + dh:h1 + dh, w0 + dw:w1 + dw]
    levels = config.GRAY_LEVELS
    counts = np.bincount(
        (ref * levels + nbr).ravel(), minlength=levels * levels
    ).reshape(levels, levels)
    if symmetric:
        counts = counts + counts.T
    return GlcmMatrix(
        probs=counts / counts.sum(),
        distance=distance,
        angle=angle,
        symmetric=symmetric,
    )


def glcm_entropy(m: GlcmMatrix) -> float:
    """Entropy of the co-occurrence probabilities, in [0, 16] bits."""
    return entropy_bits(m.probs)


def glcm_all_angles(
    img: GrayImage,
    distance: int = config.GLCM_DISTANCE,
    symmetric: bool = config.GLCM_SYMMETRIC,
) -> dict[int, GlcmMatrix]:
    """GLCM at each of the four standard angles."""
    return {angle: glcm(img, distance, angle, symmetric) for angle in config.GLCM_ANGLES}


def glcm_entropy_mean(
    img: GrayImage,
    distance: int = config.GLCM_DISTANCE,
    symmetric: bool = config.GLCM_SYMMETRIC,
) -> float:
    """Rotation-averaged GLCM entropy."""
    matrices = glcm_all_angles(img, distance, symmetric)
    return math.fsum(glcm_entropy(m) for m in matrices.values()) / len(matrices)


# =============================================================================
# Delentropy
# =============================================================================

def gradient_field(img: GrayImage, kernel: str = config.DEFAULT_KERNEL) -> GradientField:
    """Gradient samples from 2x2 forward differences (or central differences).

    forward: for each (w, h) of the (W-1)x(H-1) grid
        dx = (I(w+1,h) - I(w,h) + I(w+1,h+1) - I(w,h+1)) / 2
        dy = (I(w,h+1) - I(w,h) + I(w+1,h+1) - I(w+1,h)) / 2
    central: dx = (I(w+1,h) - I(w-1,h)) / 2, dy = (I(w,h+1) - I(w,h-1)) / 2
        over the (W-2)x(H-2) interior

    Raises:
        ImageTooSmall: image smaller than the kernel support
    """
    i = img.pixels.astype(np.float64)
    if kernel == "forward":
        if img.width < 2 or img.height < 2:
            raise ImageTooSmall(f"{img.width}x{img.height} image; forward kernel needs 2x2")
        dx = (i[:-1, 1:] - i[:-1, :-1] + i[1:, 1:] - i[1:, :-1]) / 2.0
        dy = (i[1:, :-1] - i[:-1, :-1] + i[1:, 1:] - i[:-1, 1:]) / 2.0
    elif kernel == "central":
        if img.width < 3 or img.height < 3:
            raise ImageTooSmall(f"{img.width}x{img.height} image; central kernel needs 3x3")
        dx = (i[1:-1, 2:] - i[1:-1, :-2]) / 2.0
        dy = (i[2:, 1:-1] - i[:-2, 1:-1]) / 2.0
    else:
        raise ValueError(f"unknown kernel {kernel!r}, expected one of {config.KERNELS}")
    grid_h, grid_w = dx.shape
    return GradientField(dx=dx, dy=dy, grid_w=grid_w, grid_h=grid_h)


def deledensity(g: GradientField) -> Deledensity:
    """511x511 joint histogram of rounded (dx, dy), renormalized to sum 1."""
    offset = config.GRADIENT_MAX
    nbins = config.DELEDENSITY_BINS
    rx = round_half_away(g.dx).astype(np.intp) + offset
    ry = round_half_away(g.dy).astype(np.intp) + offset
    counts = np.bincount((rx * nbins + ry).ravel(), minlength=nbins * nbins)
    total = int(counts.sum())
    return Deledensity(
        bins=(counts / total).reshape(nbins, nbins),
        sample_count=total,
    )


def delentropy(p: Deledensity) -> float:
    """DE = -½ Σ p log2 p over the deledensity."""
    return 0.5 * entropy_bits(p.bins)


def image_delentropy(img: GrayImage, kernel: str = config.DEFAULT_KERNEL) -> float:
    """gradient_field → deledensity → delentropy in one call."""
    return delentropy(deledensity(gradient_field(img, kernel)))


# =============================================================================
# Composition
# =============================================================================

def complexity_record(img: GrayImage, params: MetricParams = MetricParams()) -> ComplexityRecord:
    """Shannon, GLCM and delentropy for one image.

    The content hash is taken from the image as given; when params.resize is
    set the metrics (and reported dimensions) come from the resized copy.
    """
    digest = content_hash(img)
    if params.resize is not None:
        img = resize_bilinear(img, *params.resize)
    # undersized images report ImageTooSmall, not OffsetTooLarge
    de = image_delentropy(img, params.kernel)
    shannon = shannon_entropy(img)
    glcm_bits = glcm_entropy(
        glcm(img, params.glcm_distance, params.glcm_angle, params.glcm_symmetric)
    )
    return ComplexityRecord(
        content_hash=digest,
        shannon_bits=shannon,
        glcm_bits=glcm_bits,
        delentropy_bits=de,
        width=img.width,
        height=img.height,
        tool_version=params.tool_version(),
    )
