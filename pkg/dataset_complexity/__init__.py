"""Dataset Complexity - delentropy statistics and FID fidelity curves for image datasets."""

__version__ = "0.1.0"
