"""
Image quality metrics. Complex images are compared through their magnitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from resesop.definitions import ImageGrid
from resesop.errors import InputError, ShapeMismatchError

DEFAULT_WINDOW = 11
DEFAULT_SIGMA = 1.5
DEFAULT_K1 = 0.01
DEFAULT_K2 = 0.03

ImageLike = Union[ImageGrid, np.ndarray]


def _magnitude(image: ImageLike) -> np.ndarray:
    if isinstance(image, ImageGrid):
        return image.magnitude()
    values = np.asarray(image)
    if np.iscomplexobj(values):
        return np.abs(values)
    return values.astype(np.float64)


def _magnitudes(a: ImageLike, b: ImageLike) -> Tuple[np.ndarray, np.ndarray]:
    first, second = _magnitude(a), _magnitude(b)
    if first.shape != second.shape:
        raise ShapeMismatchError("image shape", second.shape, first.shape)
    return first, second


def _data_range(reference: np.ndarray, data_range: Optional[float]) -> float:
    value = float(np.ptp(reference)) if data_range is None else float(data_range)
    if not value > 0:
        raise InputError(f"data_range must be positive, got {value}")
    return value


def mse(a: ImageLike, b: ImageLike) -> float:
    first, second = _magnitudes(a, b)
    return float(np.mean((first - second) ** 2))


def psnr(a: ImageLike, b: ImageLike, data_range: Optional[float] = None) -> float:
    """
    Peak signal-to-noise ratio in dB; ``a`` is the reference whose value range is used
    unless ``data_range`` is given. Identical images score ``inf``.
    """
    first, second = _magnitudes(a, b)
    error = float(np.mean((first - second) ** 2))
    peak = _data_range(first, data_range)
    if error == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / error)


def gaussian_window(size: int = DEFAULT_WINDOW, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Normalized ``size x size`` Gaussian weights."""
    if size < 1 or size % 2 == 0:
        raise InputError("window size must be a positive odd number")
    offsets = np.arange(size) - size // 2
    profile = np.exp(-(offsets**2) / (2 * sigma**2))
    window = np.outer(profile, profile)
    return window / window.sum()


def ssim_map(
    a: ImageLike,
    b: ImageLike,
    window: int = DEFAULT_WINDOW,
    sigma: float = DEFAULT_SIGMA,
    k1: float = DEFAULT_K1,
    k2: float = DEFAULT_K2,
    data_range: Optional[float] = None,
) -> np.ndarray:
    """Local SSIM at every position where the window fits entirely inside the image."""
    first, second = _magnitudes(a, b)
    if window > min(first.shape):
        raise InputError(f"a {window}x{window} window does not fit a {first.shape} image")
    peak = _data_range(first, data_range)
    weights = gaussian_window(window, sigma)
    crop = window // 2

    def local_mean(values: np.ndarray) -> np.ndarray:
        filtered = ndimage.correlate(values, weights, mode="reflect")
        return filtered[crop : filtered.shape[0] - crop, crop : filtered.shape[1] - crop]

    mu_a = local_mean(first)
    mu_b = local_mean(second)
    var_a = local_mean(first * first) - mu_a * mu_a
    var_b = local_mean(second * second) - mu_b * mu_b
    cov = local_mean(first * second) - mu_a * mu_b
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )


def ssim(
    a: ImageLike,
    b: ImageLike,
    window: int = DEFAULT_WINDOW,
    sigma: float = DEFAULT_SIGMA,
    k1: float = DEFAULT_K1,
    k2: float = DEFAULT_K2,
    data_range: Optional[float] = None,
) -> float:
    """Mean structural similarity over a Gaussian sliding window."""
    return float(np.mean(ssim_map(a, b, window, sigma, k1, k2, data_range)))


@dataclass(frozen=True)
class MetricsRecord:
    ssim: float
    psnr: float
    mse: float
    data_range: float
    window: int = DEFAULT_WINDOW
    sigma: float = DEFAULT_SIGMA
    k1: float = DEFAULT_K1
    k2: float = DEFAULT_K2


def evaluate(
    reference: ImageLike,
    image: ImageLike,
    data_range: Optional[float] = None,
    window: int = DEFAULT_WINDOW,
    sigma: float = DEFAULT_SIGMA,
) -> MetricsRecord:
    """All metrics of ``image`` against ``reference``, sharing one data range."""
    first, _ = _magnitudes(reference, image)
    peak = _data_range(first, data_range)
    return MetricsRecord(
        ssim=ssim(reference, image, window, sigma, data_range=peak),
        psnr=psnr(reference, image, peak),
        mse=mse(reference, image),
        data_range=peak,
        window=window,
        sigma=sigma,
    )


__all__ = [
    "DEFAULT_WINDOW",
    "DEFAULT_SIGMA",
    "DEFAULT_K1",
    "DEFAULT_K2",
    "mse",
    "psnr",
    "gaussian_window",
    "ssim_map",
    "ssim",
    "MetricsRecord",
    "evaluate",
]
