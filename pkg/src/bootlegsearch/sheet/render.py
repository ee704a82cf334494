"""Synthetic piano-score page renderer with notehead and bootleg ground truth.

Content is laid out in staff-space units so the same content can be drawn at
any interline spacing. Drawing happens on a supersampled canvas and is
area-downsampled, which gives anti-aliased strokes similar to a scan.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from ..bootleg import mirror_position
from .project import LH_MIDDLE_ROW, RH_MIDDLE_ROW

SUPERSAMPLE = 4

# layout in staff spaces
LEFT_MARGIN = 6.0
RIGHT_MARGIN = 4.0
TOP_MARGIN = 9.0
BOTTOM_MARGIN = 6.0
STAFF_GAP = 6.0          # between the bottom line of the upper staff and top line of the lower
SYSTEM_GAP = 9.0         # between systems
EVENT_START = 5.0
BAR_EVERY = 4

LINE_THICKNESS = 0.13
STEM_THICKNESS = 0.12
BARLINE_THICKNESS = 0.16
STEM_LENGTH = 3.5
BEAM_THICKNESS = 0.45
HEAD_AXES = (0.62, 0.45)
WHOLE_AXES = (0.78, 0.5)
HEAD_ANGLE = -20.0

RH_RANGE = (-8, 9)
LH_RANGE = (-9, 8)


@dataclass
class Part:
    """Noteheads of one staff in one event; positions are half-spaces above the middle line."""

    positions: tuple
    kind: str = "filled"      # filled | hollow | whole
    accidental: bool = False
    dot: bool = False


@dataclass
class Event:
    x: float                  # staff spaces from the left page edge
    rh: Part | None = None
    lh: Part | None = None
    beam_next: bool = False


@dataclass
class PageContent:
    systems: list
    width: float               # staff spaces
    title: str = "Etude"

    @property
    def height(self) -> float:
        n = len(self.systems)
        return TOP_MARGIN + n * (8 + STAFF_GAP) + max(n - 1, 0) * SYSTEM_GAP + BOTTOM_MARGIN


@dataclass
class RenderedPage:
    image: np.ndarray                      # uint8, 255 = blank page
    spacing: float
    noteheads: np.ndarray                  # (n, 2) filled-head centres (x, y) in output pixels
    columns: list                          # ground-truth fingerprints, reading order
    column_x: list = field(default_factory=list)
    staff_tops: list = field(default_factory=list)   # output-pixel row of each staff's top line
    barline_rows: list = field(default_factory=list)  # (top, bottom) output rows per system


def _chord(rng, lo: int, hi: int, size: int) -> tuple:
    base = int(rng.integers(lo, hi - 2 * (size - 1) + 1))
    return tuple(base + 2 * i for i in range(size))


def _part(rng, rng_bounds, p_hollow, p_whole) -> Part:
    size = int(rng.choice([1, 1, 1, 2, 2, 3]))
    u = rng.random()
    kind = "whole" if u < p_whole else "hollow" if u < p_whole + p_hollow else "filled"
    return Part(_chord(rng, *rng_bounds, size), kind, bool(rng.random() < 0.1), bool(rng.random() < 0.08))


def random_page_content(rng: np.random.Generator, n_systems: int = 4, width: float = 100.0,
                        p_hollow: float = 0.08, p_whole: float = 0.04, p_beam: float = 0.3,
                        only: str | None = None) -> PageContent:
    """Random grand-staff systems; ``only`` forces every part to one notehead kind."""
    systems = []
    for _ in range(n_systems):
        events = []
        x = LEFT_MARGIN + EVENT_START
        count = 0
        while x < width - RIGHT_MARGIN - 3:
            which = rng.random()
            rh = _part(rng, RH_RANGE, p_hollow, p_whole) if which < 0.8 else None
            lh = _part(rng, LH_RANGE, p_hollow, p_whole) if which > 0.35 or rh is None else None
            for part in (rh, lh):
                if part is not None and only is not None:
                    part.kind = only
            events.append(Event(x, rh, lh))
            count += 1
            x += float(rng.uniform(3.2, 4.5))
            if count % BAR_EVERY == 0:
                x += 2.0
        for a, b in zip(events, events[1:]):
            a.beam_next = bool(_beamable(a, b) and rng.random() < p_beam)
        systems.append(events)
    return PageContent(systems, width)


def _beamable(a: Event, b: Event) -> bool:
    # beam two RH stems-up filled chords that sit in the same bar
    ok = all(e.rh is not None and e.rh.kind == "filled" and max(e.rh.positions) < 0 for e in (a, b))
    return ok and b.x - a.x < 4.6


def _bar_after(events, i) -> bool:
    return (i + 1) % BAR_EVERY == 0 and i + 1 < len(events)


class _Canvas:
    def __init__(self, width_px: int, height_px: int, spacing: float):
        self.s = spacing
        self.ss = SUPERSAMPLE
        self.img = np.full((height_px * self.ss, width_px * self.ss), 255, np.uint8)
        self.shape = (height_px, width_px)

    def c(self, v: float) -> float:
        """Output pixel coordinate -> supersampled canvas coordinate."""
        return (v + 0.5) * self.ss - 0.5

    def rect(self, x0, y0, x1, y1):
        """Filled rectangle in output pixels (fractional edges allowed)."""
        X0, X1 = sorted((self.c(x0), self.c(x1)))
        Y0, Y1 = sorted((self.c(y0), self.c(y1)))
        self.img[int(round(Y0)):int(round(Y1)) + 1, int(round(X0)):int(round(X1)) + 1] = 0

    def hline(self, x0, x1, y, t):
        self.rect(x0, y - t / 2, x1, y + t / 2)

    def vline(self, x, y0, y1, t):
        self.rect(x - t / 2, y0, x + t / 2, y1)

    def ellipse(self, x, y, axes, angle, thickness=None):
        sh = 4
        f = 1 << sh
        center = (int(round(self.c(x) * f)), int(round(self.c(y) * f)))
        ax = (int(round(axes[0] * self.ss * f)), int(round(axes[1] * self.ss * f)))
        t = -1 if thickness is None else max(1, int(round(thickness * self.ss)))
        cv2.ellipse(self.img, center, ax, angle, 0, 360, 0, t, cv2.LINE_8, sh)

    def polygon(self, pts):
        arr = np.array([[self.c(x), self.c(y)] for x, y in pts]) * 16
        cv2.fillPoly(self.img, [np.round(arr).astype(np.int32)], 0, cv2.LINE_8, 4)

    def text(self, msg, x, y, height):
        scale = height * self.ss / 22.0
        cv2.putText(self.img, msg, (int(self.c(x)), int(self.c(y))), cv2.FONT_HERSHEY_SIMPLEX,
                    scale, 0, max(1, int(round(0.2 * self.s * self.ss))), cv2.LINE_AA)

    def result(self) -> np.ndarray:
        h, w = self.shape
        return cv2.resize(self.img, (w, h), interpolation=cv2.INTER_AREA)


def _part_rows(part: Part, upper: bool) -> list[int]:
    base = RH_MIDDLE_ROW if upper else LH_MIDDLE_ROW
    return [base + p for p in part.positions]


def event_fingerprint(event: Event) -> int:
    """Ground-truth column of an event: filled heads only, with middle-register mirroring."""
    bits = 0
    for part, upper in ((event.rh, True), (event.lh, False)):
        if part is None or part.kind != "filled":
            continue
        for r in _part_rows(part, upper):
            bits |= 1 << r
            m = mirror_position(r)
            if m is not None:
                bits |= 1 << m
    return bits


def render_page(content: PageContent, spacing: float = 10.0, title: bool = True) -> RenderedPage:
    """Draw ``content`` with the given interline spacing (pixels)."""
    s = spacing
    cv = _Canvas(int(round(content.width * s)), int(round(content.height * s)), s)
    if title:
        cv.text(content.title, content.width * s * 0.4, 5.0 * s, 2.2 * s)
    heads, columns, column_x, staff_tops, bars = [], [], [], [], []
    left, right = LEFT_MARGIN * s, (content.width - RIGHT_MARGIN) * s
    for k, events in enumerate(content.systems):
        top_u = (TOP_MARGIN + k * (8 + STAFF_GAP + SYSTEM_GAP)) * s
        top_l = top_u + (4 + STAFF_GAP) * s
        staff_tops += [top_u, top_l]
        for top in (top_u, top_l):
            for i in range(5):
                cv.hline(left, right, top + i * s, LINE_THICKNESS * s)
        bar_top, bar_bot = top_u, top_l + 4 * s
        bars.append((bar_top, bar_bot))
        bar_xs = [left, right]
        for i, ev in enumerate(events):
            if _bar_after(events, i):
                bar_xs.append((ev.x + (events[i + 1].x - ev.x) / 2) * s)
        for bx in bar_xs:
            cv.vline(bx, bar_top, bar_bot, BARLINE_THICKNESS * s)
        # clef stand-ins: thin strokes, removed by every filter
        for top in (top_u, top_l):
            cv.vline(left + 1.5 * s, top - 0.8 * s, top + 4.8 * s, 0.1 * s)
            cv.vline(left + 2.3 * s, top + 0.5 * s, top + 3.5 * s, 0.1 * s)
        stem_tops = {}
        for i, ev in enumerate(events):
            x = ev.x * s
            for part, top, upper in ((ev.rh, top_u, True), (ev.lh, top_l, False)):
                if part is None:
                    continue
                center = top + 2 * s
                ys = [center - p * s / 2 for p in part.positions]
                _draw_ledgers(cv, x, part.positions, center, s)
                for p, y in zip(part.positions, ys):
                    if part.kind == "filled":
                        cv.ellipse(x, y, (HEAD_AXES[0] * s, HEAD_AXES[1] * s), HEAD_ANGLE)
                        heads.append((x, y))
                    elif part.kind == "hollow":
                        cv.ellipse(x, y, (HEAD_AXES[0] * s, HEAD_AXES[1] * s), HEAD_ANGLE, 0.14 * s)
                    else:
                        cv.ellipse(x, y, (WHOLE_AXES[0] * s, WHOLE_AXES[1] * s), 0.0, 0.2 * s)
                    if part.accidental and p == part.positions[0]:
                        _draw_sharp(cv, x - 1.7 * s, y, s)
                if part.dot:
                    p = part.positions[-1]
                    dy = s / 4 if p % 2 == 0 else 0
                    cv.ellipse(x + 1.2 * s, ys[-1] - dy, (0.18 * s, 0.18 * s), 0.0)
                if part.kind != "whole":
                    stem_tops[(i, upper)] = _draw_stem(cv, x, ys, part.positions, s)
            fp = event_fingerprint(ev)
            if fp:
                columns.append(fp)
                column_x.append(x)
        _draw_beams(cv, events, stem_tops, top_u, s)
    return RenderedPage(cv.result(), s, np.array(heads, dtype=float).reshape(-1, 2), columns, column_x,
                        staff_tops, bars)


def _draw_ledgers(cv: _Canvas, x, positions, center, s):
    hi, lo = max(positions), min(positions)
    for p in range(6, hi + 1, 2):
        cv.hline(x - 1.0 * s, x + 1.0 * s, center - p * s / 2, LINE_THICKNESS * s)
    for p in range(-6, lo - 1, -2):
        cv.hline(x - 1.0 * s, x + 1.0 * s, center - p * s / 2, LINE_THICKNESS * s)


def _draw_stem(cv: _Canvas, x, ys, positions, s):
    up = np.mean(positions) < 0
    if up:
        sx = x + (HEAD_AXES[0] - 0.06) * s
        y_end = min(ys) - STEM_LENGTH * s
        cv.vline(sx, y_end, max(ys), STEM_THICKNESS * s)
    else:
        sx = x - (HEAD_AXES[0] - 0.06) * s
        y_end = max(ys) + STEM_LENGTH * s
        cv.vline(sx, min(ys), y_end, STEM_THICKNESS * s)
    return sx, y_end, up, max(ys)


def _draw_beams(cv: _Canvas, events, stem_tops, top_u, s):
    for i, ev in enumerate(events[:-1]):
        if not ev.beam_next:
            continue
        a, b = stem_tops.get((i, True)), stem_tops.get((i + 1, True))
        if a is None or b is None or not (a[2] and b[2]):
            continue
        y = min(a[1], b[1])
        # extend both stems to the beam, then draw the beam below the stem tips
        cv.vline(a[0], y, a[3], STEM_THICKNESS * s)
        cv.vline(b[0], y, b[3], STEM_THICKNESS * s)
        cv.polygon([(a[0], y), (b[0], y), (b[0], y + BEAM_THICKNESS * s), (a[0], y + BEAM_THICKNESS * s)])


def _draw_sharp(cv: _Canvas, x, y, s):
    for dx in (-0.25, 0.25):
        cv.vline(x + dx * s, y - 1.3 * s, y + 1.3 * s, 0.09 * s)
    for dy in (-0.4, 0.4):
        cv.polygon([(x - 0.5 * s, y + dy * s + 0.1 * s), (x + 0.5 * s, y + dy * s - 0.2 * s),
                    (x + 0.5 * s, y + dy * s + 0.05 * s), (x - 0.5 * s, y + dy * s + 0.35 * s)])


def synthetic_page(seed: int, spacing: float = 10.0, n_systems: int = 4, width: float = 100.0, **kw) -> RenderedPage:
    rng = np.random.default_rng(seed)
    return render_page(random_page_content(rng, n_systems, width, **kw), spacing)


def staff_fixture(spacing: float, tops: list[float], width: int = 400, height: int | None = None,
                  thickness: float | None = None) -> np.ndarray:
    """Plain 5-line staves (uint8, 255 = blank page) with top lines at the given rows."""
    height = height or int(max(tops) + 6 * spacing + 20)
    t = LINE_THICKNESS * spacing if thickness is None else thickness
    cv = _Canvas(width, height, spacing)
    for top in tops:
        for i in range(5):
            cv.hline(10, width - 10, top + i * spacing, t)
    return cv.result()


def degrade(image: np.ndarray, rng: np.random.Generator, lighting: float = 0.25, blur: float = 0.6,
            noise: float = 0.04) -> np.ndarray:
    """Scan-like corruption: a smooth lighting gradient, optical blur and sensor noise."""
    h, w = image.shape
    img = image.astype(np.float32) / 255.0
    if blur > 0:
        img = cv2.GaussianBlur(img, (0, 0), blur)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    angle = rng.uniform(0, 2 * np.pi)
    ramp = (np.cos(angle) * xx / w + np.sin(angle) * yy / h)
    ramp = (ramp - ramp.min()) / max(float(np.ptp(ramp)), 1e-9)
    img = img * (1.0 - lighting * ramp)
    img = img + rng.normal(0.0, noise, img.shape).astype(np.float32)
    return (np.clip(img, 0, 1) * 255).round().astype(np.uint8)
