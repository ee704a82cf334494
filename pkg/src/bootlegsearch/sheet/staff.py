"""Staff-line and barline features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import cv2
import numpy as np
from scipy.signal import find_peaks

from .params import DEFAULTS, SheetHyperparams


@dataclass(frozen=True)
class StaffLineFeatures:
    """Comb responses indexed by (row, column block, spacing index).

    The comb for spacing ``s`` at row ``y`` has teeth at ``y + k*s`` for
    k = -2..2, i.e. it is centred on the middle staff line.
    """

    tensor: np.ndarray
    spacings: np.ndarray
    block_width: int

    @property
    def n_blocks(self) -> int:
        return self.tensor.shape[1]


@dataclass(frozen=True)
class BarlineFeatures:
    row_sums: np.ndarray


class Staff(NamedTuple):
    center: float
    spacing: float
    strength: float

    @property
    def top(self) -> float:
        return self.center - 2 * self.spacing

    @property
    def bottom(self) -> float:
        return self.center + 2 * self.spacing


def _open_rect(image: np.ndarray, height: int, width: int) -> np.ndarray:
    # odd sizes keep cv2's erode/dilate anchors aligned, even ones shift the result by a pixel
    kernel = np.ones((height | 1, width | 1), np.uint8)
    return cv2.morphologyEx(image.astype(np.float32), cv2.MORPH_OPEN, kernel)


def isolate_staff_lines(image: np.ndarray, params: SheetHyperparams = DEFAULTS) -> np.ndarray:
    lines = _open_rect(image, 1, params.px(params.hline_kernel_factor))
    bars = _open_rect(lines, params.notebar_kernel_height, 1)
    return np.clip(lines - params.notebar_removal * bars, 0.0, None)


def comb_bank(rows: np.ndarray, spacings: np.ndarray) -> np.ndarray:
    """Centred 5-tooth comb responses of every column of ``rows`` (H, B) -> (H, B, S)."""
    h = rows.shape[0]
    grid = np.arange(h, dtype=np.float64)
    out = np.zeros((h, rows.shape[1], len(spacings)), dtype=np.float32)
    for j, s in enumerate(spacings):
        for k in (-2, -1, 0, 1, 2):
            y = grid + k * s
            y0 = np.floor(y).astype(np.int64)
            frac = (y - y0)[:, None]
            lo = np.where(((y0 >= 0) & (y0 < h))[:, None], rows[np.clip(y0, 0, h - 1)], 0.0)
            hi = np.where(((y0 + 1 >= 0) & (y0 + 1 < h))[:, None], rows[np.clip(y0 + 1, 0, h - 1)], 0.0)
            out[:, :, j] += ((1 - frac) * lo + frac * hi).astype(np.float32)
    return out


def compute_staffline_features(image: np.ndarray, params: SheetHyperparams = DEFAULTS) -> StaffLineFeatures:
    """Isolate horizontal lines, then run a bank of vertical comb filters per column block."""
    lines = isolate_staff_lines(image, params)
    h, w = lines.shape
    nb = max(1, min(params.staff_feature_blocks, w))
    bw = int(np.ceil(w / nb))
    rows = np.stack([lines[:, i * bw:(i + 1) * bw].mean(axis=1) if i * bw < w else np.zeros(h)
                     for i in range(nb)], axis=1)
    c = params.canonical_spacing
    spacings = np.arange(params.staff_spacing_low_factor * c, params.staff_spacing_high_factor * c + 1e-9,
                         params.staff_spacing_step)
    return StaffLineFeatures(comb_bank(rows, spacings), spacings, bw)


def compute_barline_features(image: np.ndarray, params: SheetHyperparams = DEFAULTS) -> BarlineFeatures:
    """Keep only tall vertical strokes and sum each row."""
    vlines = _open_rect(image, params.px(params.barline_kernel_factor), params.barline_kernel_width)
    return BarlineFeatures(vlines.sum(axis=1).astype(np.float64))


def _parabolic(values: np.ndarray, i: int) -> float:
    if 0 < i < len(values) - 1:
        a, b, c = values[i - 1], values[i], values[i + 1]
        denom = a - 2 * b + c
        if denom < 0:
            return i + 0.5 * (a - c) / denom
    return float(i)


def locate_staves(features: StaffLineFeatures, params: SheetHyperparams = DEFAULTS) -> list[Staff]:
    """Row-local maxima of the block-summed comb response, top to bottom."""
    agg = features.tensor.sum(axis=1)
    profile = agg.max(axis=1)
    if profile.size == 0 or profile.max() <= 0:
        return []
    peaks, props = find_peaks(profile, height=params.staff_peak_rel_threshold * profile.max(),
                              distance=params.px(params.min_stave_separation_factor))
    if len(peaks) > params.max_staves:
        keep = np.argsort(-props["peak_heights"], kind="stable")[:params.max_staves]
        peaks = np.sort(peaks[keep])
    staves = []
    for p in peaks:
        j = int(agg[p].argmax())
        staves.append(Staff(_parabolic(agg[:, j], int(p)), float(features.spacings[j]), float(profile[p])))
    return staves


def local_staff(features: StaffLineFeatures, staff: Staff, x: float, params: SheetHyperparams = DEFAULTS) -> tuple[float, float]:
    """Centre and spacing of ``staff`` near column ``x`` (falls back to the global fit)."""
    b = int(np.clip(x // features.block_width, 0, features.n_blocks - 1))
    win = params.px(params.staff_refine_window_factor)
    lo = max(0, int(round(staff.center)) - win)
    hi = min(features.tensor.shape[0], int(round(staff.center)) + win + 1)
    region = features.tensor[lo:hi, b, :]
    if region.size == 0:
        return staff.center, staff.spacing
    r, j = np.unravel_index(int(region.argmax()), region.shape)
    if region[r, j] < params.staff_refine_min_rel * staff.strength / features.n_blocks:
        return staff.center, staff.spacing
    return lo + (_parabolic(features.tensor[lo:hi, b, j], int(r))), float(features.spacings[j])
