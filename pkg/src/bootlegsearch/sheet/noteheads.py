"""Filled-notehead detection by morphological filtering and template-sized components."""

from __future__ import annotations

from typing import NamedTuple

import cv2
import numpy as np
from scipy import ndimage
from skimage.filters import threshold_otsu

from .params import DEFAULTS, SheetHyperparams


class NoteheadBlob(NamedTuple):
    center_x: float
    center_y: float
    bbox_w: int
    bbox_h: int


class Template(NamedTuple):
    width: float
    height: float
    area: float


def open_circular(image: np.ndarray, params: SheetHyperparams = DEFAULTS) -> np.ndarray:
    """Erode then dilate with a disk; keeps only blobs at least notehead-sized."""
    d = params.px(params.notehead_kernel_factor)
    kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (d, d))
    return cv2.morphologyEx(image.astype(np.float32), cv2.MORPH_OPEN, kernel)


def binarize(opened: np.ndarray, params: SheetHyperparams = DEFAULTS) -> np.ndarray:
    if opened.max() <= params.min_binarize_threshold:
        return np.zeros(opened.shape, dtype=bool)
    thresh = max(float(threshold_otsu(opened)), params.min_binarize_threshold)
    return opened > thresh


def _components(binary: np.ndarray):
    labels, n = ndimage.label(binary)
    if n == 0:
        return labels, []
    ys, xs = np.nonzero(labels)
    lab = labels[ys, xs]
    area = np.bincount(lab, minlength=n + 1)[1:]
    cy = np.bincount(lab, weights=ys, minlength=n + 1)[1:] / area
    cx = np.bincount(lab, weights=xs, minlength=n + 1)[1:] / area
    comps = []
    for i, sl in enumerate(ndimage.find_objects(labels)):
        h = sl[0].stop - sl[0].start
        w = sl[1].stop - sl[1].start
        comps.append((i + 1, sl, int(area[i]), float(cx[i]), float(cy[i]), w, h))
    return labels, comps


def estimate_template(comps, params: SheetHyperparams = DEFAULTS) -> Template | None:
    """Median size of components that look like isolated noteheads."""
    s2 = params.canonical_spacing ** 2
    cands = [(w, h, a) for _, _, a, _, _, w, h in comps
             if params.template_min_area_factor * s2 <= a <= params.template_max_area_factor * s2
             and params.template_min_aspect <= w / h <= params.template_max_aspect]
    if not cands:
        return None
    w, h, a = np.median(np.array(cands, dtype=float), axis=0)
    return Template(float(w), float(h), float(a))


def _split_vertical(labels: np.ndarray, label: int, sl, n: int, template: Template) -> list[NoteheadBlob]:
    """Split a vertical stack of n touching noteheads with 1-D k-means on pixel rows."""
    ys, xs = np.nonzero(labels[sl] == label)
    ys = ys + sl[0].start
    xs = xs + sl[1].start
    centers = np.quantile(ys, (np.arange(n) + 0.5) / n)
    for _ in range(20):
        assign = np.argmin(np.abs(ys[:, None] - centers[None, :]), axis=1)
        new = np.array([ys[assign == k].mean() if np.any(assign == k) else centers[k] for k in range(n)])
        if np.allclose(new, centers):
            break
        centers = new
    blobs = []
    for k in range(n):
        m = assign == k
        if not m.any():
            continue
        blobs.append(NoteheadBlob(float(xs[m].mean()), float(ys[m].mean()),
                                  int(xs[m].max() - xs[m].min() + 1), int(round(template.height))))
    return blobs


def detect_noteheads(image: np.ndarray, params: SheetHyperparams = DEFAULTS) -> list[NoteheadBlob]:
    """Filled noteheads on a preprocessed (ink = 1, canonical spacing) page.

    Circular opening removes lines, stems and hollow heads; the median size
    of notehead-like components gives a template, and components whose
    bounding box lies inside the tolerance band around the template are kept.
    Vertical stacks of touching heads are split when their height fits a
    whole number of heads and their area roughly agrees.
    """
    opened = open_circular(image, params)
    binary = binarize(opened, params)
    labels, comps = _components(binary)
    if not comps:
        return []
    template = estimate_template(comps, params)
    if template is None:
        return []
    lo, hi = params.blob_tolerance_low, params.blob_tolerance_high
    blobs = []
    for label, sl, area, cx, cy, w, h in comps:
        if not lo * template.width <= w <= hi * template.width:
            continue
        if lo * template.height <= h <= hi * template.height:
            blobs.append(NoteheadBlob(cx, cy, w, h))
            continue
        if params.chord_split and h > hi * template.height:
            # stacked heads in thirds sit one interline apart; area only sanity-checks the count
            n = int(round((h - template.height) / params.canonical_spacing)) + 1
            if 2 <= n <= params.chord_max_notes and abs(area / template.area - n) <= params.chord_area_tolerance * n:
                blobs.extend(_split_vertical(labels, label, sl, n, template))
    blobs.sort(key=lambda b: (b.center_x, b.center_y))
    return blobs
