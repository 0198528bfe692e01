"""Image similarity metrics: MSE, SSIM and a Frechet distance over
hand-crafted features (48-bin CIELAB histogram + 4 gradient statistics).
"""

from __future__ import annotations

import numpy as np

from .colors import srgb_to_lab

FEATURE_DIM = 52
_HIST_BINS = 16
_LAB_RANGES = ((0.0, 100.0), (-110.0, 110.0), (-110.0, 110.0))


class MetricError(ValueError):
    pass


def _as_float(img: np.ndarray) -> np.ndarray:
    """8-bit images scaled to [0,1]; float input assumed already scaled."""
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64)


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise MetricError(f"dimension mismatch: {a.shape} vs {b.shape}")


def luminance(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma in [0,1] from an RGB image (grayscale passes through)."""
    arr = _as_float(img)
    if arr.ndim == 2:
        return arr
    return 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]


def mse(a: np.ndarray, b: np.ndarray) -> float:
    _check_pair(np.asarray(a), np.asarray(b))
    fa, fb = _as_float(a), _as_float(b)
    return float(np.mean((fa - fb) ** 2))


def ssim(a: np.ndarray, b: np.ndarray, window: int = 8, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local SSIM over all window x window patches of the luminance.

    Uniform windows, population statistics, dynamic range 1.0.
    """
    _check_pair(np.asarray(a), np.asarray(b))
    la, lb = luminance(a), luminance(b)
    h, w = la.shape
    if h < window or w < window:
        raise MetricError(f"image {la.shape} smaller than window {window}")
    wa = np.lib.stride_tricks.sliding_window_view(la, (window, window))
    wb = np.lib.stride_tricks.sliding_window_view(lb, (window, window))
    mu_a = wa.mean(axis=(-1, -2))
    mu_b = wb.mean(axis=(-1, -2))
    var_a = (wa**2).mean(axis=(-1, -2)) - mu_a**2
    var_b = (wb**2).mean(axis=(-1, -2)) - mu_b**2
    cov = (wa * wb).mean(axis=(-1, -2)) - mu_a * mu_b
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _grad_sq(field: np.ndarray) -> np.ndarray:
    gx = np.diff(field, axis=1, append=field[:, -1:])
    gy = np.diff(field, axis=0, append=field[-1:, :])
    return gx**2 + gy**2


def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    return np.sqrt(_grad_sq(luminance(img)))


def sharpness(img: np.ndarray) -> float:
    """No-reference sharpness: mean squared CIELAB-lightness gradient."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        light = _as_float(arr)
    else:
        rgb = arr if arr.dtype == np.uint8 else np.clip(_as_float(arr) * 255, 0, 255)
        light = srgb_to_lab(rgb)[..., 0] / 100.0
    return float(np.mean(_grad_sq(light)))


def feature_vector(img: np.ndarray) -> np.ndarray:
    """F=52 features: 3x16 CIELAB histograms + 4 gradient statistics."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise MetricError("feature extraction expects an RGB image")
    lab = srgb_to_lab(arr if arr.dtype == np.uint8 else np.clip(_as_float(arr) * 255, 0, 255))
    n = lab.shape[0] * lab.shape[1]
    feats = []
    for ch, (lo, hi) in enumerate(_LAB_RANGES):
        hist, _ = np.histogram(lab[..., ch], bins=_HIST_BINS, range=(lo, hi))
        feats.append(hist.astype(np.float64) / n)
    g = gradient_magnitude(arr)
    feats.append(
        np.array(
            [g.mean(), g.std(), np.mean(g**2), float(np.mean(g > 0.1))],
            dtype=np.float64,
        )
    )
    vec = np.concatenate(feats)
    if not np.all(np.isfinite(vec)):
        raise MetricError("non-finite features")
    return vec


def frechet_distance(mu1, cov1, mu2, cov2) -> float:
    """Frechet distance between two Gaussians.

    Tr((S1 S2)^(1/2)) is computed from the eigenvalues of the symmetrized
    product with negatives clamped to zero; keeps the result real and
    non-negative under float noise.
    """
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    cov1 = np.asarray(cov1, dtype=np.float64)
    cov2 = np.asarray(cov2, dtype=np.float64)
    diff = float(np.sum((mu1 - mu2) ** 2))
    prod = cov1 @ cov2
    sym = (prod + prod.T) / 2
    eigvals = np.linalg.eigvalsh(sym)
    trace_sqrt = float(np.sum(np.sqrt(np.clip(eigvals, 0, None))))
    val = diff + float(np.trace(cov1) + np.trace(cov2)) - 2 * trace_sqrt
    return max(val, 0.0)


def fid_lite(corpus_a, corpus_b) -> float:
    """Frechet distance between Gaussian fits of per-image features."""
    feats_a = np.stack([feature_vector(im) for im in corpus_a])
    feats_b = np.stack([feature_vector(im) for im in corpus_b])
    if feats_a.shape[0] < 2 or feats_b.shape[0] < 2:
        raise MetricError("each corpus needs >= 2 images")
    mu_a, mu_b = feats_a.mean(axis=0), feats_b.mean(axis=0)
    cov_a = np.cov(feats_a, rowvar=False)
    cov_b = np.cov(feats_b, rowvar=False)
    return frechet_distance(mu_a, cov_a, mu_b, cov_b)
