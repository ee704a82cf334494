"""Page and piece level sheet-image to bootleg-score extraction."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import cv2
import numpy as np

from ..bootleg import BootlegScore, Variant
from .noteheads import NoteheadBlob, detect_noteheads
from .params import DEFAULTS, SheetHyperparams
from .preprocess import ImageDecodeError, PageError, load_image, preprocess
from .project import PageProjection, project_page_details
from .staff import compute_barline_features, compute_staffline_features

log = logging.getLogger(__name__)

PageSource = Union[str, Path, np.ndarray]


class EmptyPieceError(ValueError):
    pass


@dataclass
class PageResult:
    score: BootlegScore
    image: np.ndarray
    scale: float
    spacing: float
    blobs: list
    projection: PageProjection

    @property
    def stats(self) -> dict:
        return {"spacing": round(self.spacing, 3), **self.projection.stats}

    def blobs_in_input_coords(self) -> list[NoteheadBlob]:
        return [NoteheadBlob(b.center_x / self.scale, b.center_y / self.scale, b.bbox_w, b.bbox_h)
                for b in self.blobs]


def _as_image(page: PageSource) -> np.ndarray:
    return load_image(page) if isinstance(page, (str, Path)) else page


def analyze_page(page: PageSource, params: SheetHyperparams = DEFAULTS) -> PageResult:
    pre = preprocess(_as_image(page), params)
    blobs = detect_noteheads(pre.image, params)
    staff = compute_staffline_features(pre.image, params)
    bars = compute_barline_features(pre.image, params)
    proj = project_page_details(blobs, staff, bars, params)
    return PageResult(proj.score, pre.image, pre.scale, pre.spacing, blobs, proj)


def page_bootleg(page: PageSource, params: SheetHyperparams = DEFAULTS) -> BootlegScore:
    """Bootleg fragment of one page image (array or file path)."""
    return analyze_page(page, params).score


def _safe_page(args):
    page, params = args
    try:
        return analyze_page(page, params), None
    except (PageError, ImageDecodeError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def analyze_piece(pages: Sequence[PageSource], params: SheetHyperparams = DEFAULTS, jobs: int = 1):
    """Per-page results (None for failed pages) and the failure messages."""
    work = [(p, params) for p in pages]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_safe_page, work))
    else:
        out = [_safe_page(w) for w in work]
    return [r for r, _ in out], [e for _, e in out]


def piece_bootleg(pages: Sequence[PageSource], params: SheetHyperparams = DEFAULTS, jobs: int = 1) -> BootlegScore:
    """Concatenate page fragments in page order.

    Pages that fail (no staves, unpairable staves, undecodable) contribute
    nothing and are logged; if every page fails, :class:`EmptyPieceError`.
    """
    if not pages:
        raise EmptyPieceError("no pages given")
    results, errors = analyze_piece(pages, params, jobs)
    for i, err in enumerate(errors):
        if err:
            log.warning("page %d skipped: %s", i + 1, err)
    if all(r is None for r in results):
        raise EmptyPieceError(f"all {len(pages)} pages failed: " + "; ".join(errors))
    return BootlegScore.concatenate([r.score for r in results if r is not None], Variant.SHEET)


def draw_overlay(result: PageResult) -> np.ndarray:
    """RGB debug view of the normalised page: staves, detected heads and their rows."""
    ink = np.clip(result.image, 0, 1)
    canvas = cv2.cvtColor(((1 - ink) * 255).astype(np.uint8), cv2.COLOR_GRAY2BGR)
    w = canvas.shape[1]
    paired = {i for pair in result.projection.systems for i in pair}
    for i, st in enumerate(result.projection.staves):
        color = (0, 160, 0) if i in paired else (0, 0, 220)
        for k in range(-2, 3):
            y = int(round(st.center + k * st.spacing))
            cv2.line(canvas, (0, y), (w - 1, y), color, 1)
    for note in result.projection.notes:
        b = note.blob
        center = (int(round(b.center_x)), int(round(b.center_y)))
        color = (0, 0, 255) if note.clamped else (255, 0, 0)
        cv2.circle(canvas, center, max(2, b.bbox_h // 2), color, 1)
        cv2.putText(canvas, str(note.position), (center[0] + 6, center[1] - 4),
                    cv2.FONT_HERSHEY_PLAIN, 0.7, color, 1)
    return cv2.cvtColor(canvas, cv2.COLOR_BGR2RGB)
