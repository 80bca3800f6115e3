"""Configuration constants for Dataset Complexity."""

import os

# ─── Imaging ──────────────────────────────────────────────────────────────────

# 8-bit grayscale: every metric sees values 0..255
GRAY_LEVELS = 256

# ITU-R BT.601 luma weights (R, G, B)
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# 16-bit samples are brought to 8 bits by dividing by this
SCALE_16_TO_8 = 257.0

# Files picked up when a directory is given
IMAGE_SUFFIXES = (".png", ".pgm")

# ─── Metrics ──────────────────────────────────────────────────────────────────

# Gradient components live in [-255, 255]; one integer bin per value
GRADIENT_MAX = 255
DELEDENSITY_BINS = 2 * GRADIENT_MAX + 1   # 511

# "forward" = 2x2 forward-difference pair, "central" = central differences
DEFAULT_KERNEL = "forward"
KERNELS = ("forward", "central")

# GLCM defaults (distance in pixels, angle in degrees)
GLCM_DISTANCE = 1
GLCM_ANGLE = 0
GLCM_SYMMETRIC = False
GLCM_ANGLES = (0, 45, 90, 135)

# Tolerance used when checking that a probability table sums to 1
PROBABILITY_SUM_TOL = 1e-12

# ─── Stats / record store ─────────────────────────────────────────────────────

HISTOGRAM_RANGE = (0.0, 18.0)   # bits
HISTOGRAM_BIN_WIDTH = 0.25

METRICS = ("shannon", "glcm", "delentropy")
DEFAULT_METRIC = "delentropy"

RECORD_SCHEMA = "v1"

# ─── FID ──────────────────────────────────────────────────────────────────────

# Eigenvalues in [-tol * lambda_max, 0) are noise and clamp to 0
EIGEN_REL_TOL = 1e-10

# Slightly negative results within this bound are clamped to 0
FID_NEGATIVE_TOL = 1e-8

FEATURE_MAGIC = b"FEAT"
FEATURE_HEADER_BYTES = 16

# ─── Bench ────────────────────────────────────────────────────────────────────

# |slope| below this (FID per image) marks an interval as a plateau
PLATEAU_THRESHOLD = 1e-3

# Training-set sizes of the subset protocol
SUBSET_SIZES = (500, 1000, 2500)

DEFAULT_SEED = 0

CORRELATION_STATS = ("mean", "stdDev", "cv")
MIN_DATASETS_FOR_RHO = 3

MANIFEST_SCHEMA = "v1"
REPORT_SCHEMA = "v1"

# Significant digits for every float written to a report or printed score
REPORT_SIGNIFICANT_DIGITS = 9

# ─── CLI ──────────────────────────────────────────────────────────────────────

DEFAULT_JOBS = os.cpu_count() or 1
OUTPUT_FORMATS = ("json", "csv", "text")
DEFAULT_FORMAT = "json"
DEFAULT_OUT_DIR = "out"

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

LOG_FORMAT = "%(asctime)s | %(levelname)-7s | %(name)s | %(message)s"
