"""Grayscale conversion, background removal and interline normalisation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import gaussian_filter1d

from .params import DEFAULTS, SheetHyperparams


class ImageDecodeError(ValueError):
    pass


class PageError(ValueError):
    """A page that cannot contribute to the bootleg score."""


class NoStaffDetected(PageError):
    pass


@dataclass(frozen=True)
class Preprocessed:
    """Ink image (1 = ink, 0 = background) rescaled to the canonical interline spacing.

    ``scale`` maps input pixel coordinates to normalised ones.
    """

    image: np.ndarray
    scale: float
    spacing: float
    comb_score: float


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG/TIFF page into a float grayscale array in [0, 1] (1 = white)."""
    try:
        with Image.open(path) as im:
            gray = np.asarray(im.convert("L"), dtype=np.float32)
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageDecodeError(f"cannot decode image {path}: {exc}") from exc
    return gray / 255.0


def to_gray(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim == 3:
        arr = cv2.cvtColor(arr[..., :3].astype(np.float32), cv2.COLOR_RGB2GRAY)
    if arr.ndim != 2 or arr.size == 0:
        raise ImageDecodeError(f"expected a 2-D grayscale or RGB image, got shape {np.shape(image)}")
    arr = arr.astype(np.float32)
    if np.issubdtype(np.asarray(image).dtype, np.integer):
        arr /= 255.0
    return np.clip(arr, 0.0, 1.0)


def remove_background(gray: np.ndarray, params: SheetHyperparams = DEFAULTS) -> np.ndarray:
    """Subtract the page from a heavily box-blurred copy; ink comes out positive."""
    k = max(3, int(round(params.background_blur_factor * params.max_line_spacing)))
    blurred = cv2.blur(gray, (k, k), borderType=cv2.BORDER_REFLECT)
    return np.clip(blurred - gray, 0.0, 1.0)


def _shifted(profile: np.ndarray, offset: float) -> np.ndarray:
    """profile[y + offset] for every row y, linearly interpolated, zero outside."""
    y = np.arange(profile.shape[0], dtype=np.float64) + offset
    return np.interp(y, np.arange(profile.shape[0]), profile, left=0.0, right=0.0)


def penalized_comb_responses(profile: np.ndarray, spacings: np.ndarray) -> np.ndarray:
    """Response of a 5-tooth comb (top tooth at row y) minus the 4 in-between rows.

    Returns shape (len(spacings), len(profile)).
    """
    out = np.empty((len(spacings), profile.shape[0]))
    for i, s in enumerate(spacings):
        pos = sum(_shifted(profile, k * s) for k in range(5))
        neg = sum(_shifted(profile, (k + 0.5) * s) for k in range(4))
        out[i] = pos - neg
    return out


def spacing_profiles(ink: np.ndarray, params: SheetHyperparams = DEFAULTS) -> np.ndarray:
    """Row medians of interior vertical strips, lightly smoothed. Shape (strips, H)."""
    n = params.spacing_profile_strips
    w = ink.shape[1] // (n + 2)
    if w == 0:
        return np.median(ink, axis=1)[None, :]
    strips = [np.median(ink[:, (i + 1) * w:(i + 2) * w], axis=1) for i in range(n)]
    return np.stack([gaussian_filter1d(s.astype(np.float64), params.spacing_profile_sigma) for s in strips])


def estimate_line_spacing(ink: np.ndarray, params: SheetHyperparams = DEFAULTS) -> tuple[float, float]:
    """Staff-line spacing with the strongest comb response, and that response."""
    spacings = np.arange(params.min_line_spacing, params.max_line_spacing + 1e-9, params.line_spacing_step)
    scores = np.zeros(len(spacings))
    profiles = spacing_profiles(ink, params)
    for profile in profiles:
        scores += penalized_comb_responses(profile, spacings).max(axis=1)
    scores /= len(profiles)
    best = int(np.argmax(scores))
    return float(spacings[best]), float(scores[best])


def rescale(image: np.ndarray, scale: float) -> np.ndarray:
    if abs(scale - 1.0) < 1e-9:
        return image.copy()
    h, w = image.shape
    size = (max(1, int(round(w * scale))), max(1, int(round(h * scale))))
    interp = cv2.INTER_AREA if scale < 1 else cv2.INTER_LINEAR
    return cv2.resize(image, size, interpolation=interp)


def preprocess(image: np.ndarray, params: SheetHyperparams = DEFAULTS) -> Preprocessed:
    """Grayscale -> background removal -> rescale to the canonical interline spacing.

    Raises :class:`NoStaffDetected` when no comb filter responds above the
    noise floor (blank or staff-free pages).
    """
    ink = remove_background(to_gray(image), params)
    if not ink.any():
        raise NoStaffDetected("page is empty after background removal")
    spacing, score = estimate_line_spacing(ink, params)
    if score < params.min_comb_response:
        raise NoStaffDetected(f"no staff lines found (best comb response {score:.3f})")
    scale = params.canonical_spacing / spacing
    return Preprocessed(rescale(ink, scale).astype(np.float32), scale, spacing, score)
