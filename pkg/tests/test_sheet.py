import difflib

import cv2
import numpy as np
import pytest

from bootlegsearch.bootleg import mirror_position, unpack_fingerprint
from bootlegsearch.sheet import (
    DEFAULTS, EmptyPieceError, NoStaffDetected, NoteheadBlob, ParamsError, StaffPairingError, analyze_page,
    compute_barline_features, compute_staffline_features, detect_noteheads, format_params, page_bootleg,
    parse_params, piece_bootleg, preprocess, project_page,
)
from bootlegsearch.sheet.project import merge_columns, position_row, staff_position
from bootlegsearch.sheet.project import project_page_details
from bootlegsearch.sheet.render import (
    Event, PageContent, Part, degrade, random_page_content, render_page, staff_fixture, synthetic_page,
)
from bootlegsearch.sheet.staff import locate_staves


def ink(img):
    return 1.0 - img.astype(np.float32) / 255.0


def one_event_page(rh=None, lh=None, spacing=10.0):
    return render_page(PageContent([[Event(30.0, rh, lh)]], 60.0), spacing, title=False)


def mirror_closed(fps):
    for fp in fps:
        bits = set(np.flatnonzero(unpack_fingerprint(fp)).tolist())
        for b in bits:
            m = mirror_position(b)
            if m is not None and m not in bits:
                return False
    return True


# preprocessing

def test_uniform_image_has_no_staff():
    with pytest.raises(NoStaffDetected):
        preprocess(np.full((300, 300), 200, np.uint8))


@pytest.mark.parametrize("spacing", [10.0, 14.0])
def test_spacing_normalisation(spacing):
    img = staff_fixture(spacing, [40, 40 + 9 * spacing], width=500)
    pre = preprocess(img)
    assert abs(pre.spacing - spacing) <= DEFAULTS.line_spacing_step
    assert pre.scale == pytest.approx(10.0 / spacing, rel=0.03)
    if spacing == 10.0:
        assert pre.scale == 1.0


# noteheads

def test_blank_page_has_no_noteheads():
    assert detect_noteheads(np.zeros((200, 300), np.float32)) == []


def test_twenty_filled_noteheads_found():
    events = [Event(12.0 + 4.5 * i, Part((i % 5 - 2,)), Part((2 - i % 5,))) for i in range(10)]
    page = render_page(PageContent([events], 60.0), 10.0, title=False)
    assert len(page.noteheads) == 20
    blobs = detect_noteheads(preprocess(page.image).image)
    found = np.array([(b.center_x, b.center_y) for b in blobs])
    d = np.hypot(*(found[:, None, :] - page.noteheads[None, :, :]).transpose(2, 0, 1))
    hits = int((d.min(axis=0) <= 2.0).sum())
    false_pos = int((d.min(axis=1) > 2.0).sum())
    assert hits >= 18 and false_pos <= 2


@pytest.mark.parametrize("kind", ["hollow", "whole"])
def test_unfilled_heads_ignored(kind):
    content = random_page_content(np.random.default_rng(4), n_systems=2, width=60, only=kind)
    page = render_page(content, 10.0, title=False)
    assert detect_noteheads(preprocess(page.image).image) == []


# staff and barline features

def test_blank_page_features_are_zero():
    blank = np.zeros((200, 300), np.float32)
    assert not compute_staffline_features(blank).tensor.any()
    assert not compute_barline_features(blank).row_sums.any()


def test_staff_comb_argmax():
    s, r = 10.0, 50
    feats = compute_staffline_features(ink(staff_fixture(s, [r], width=400, height=160)))
    assert feats.tensor.min() >= 0
    t = feats.tensor.max(axis=1)
    row, si = np.unravel_index(np.argmax(t), t.shape)
    assert abs(row - (r + 2 * s)) <= 1
    assert feats.spacings[si] == pytest.approx(s)


def test_two_staves_two_maxima():
    feats = compute_staffline_features(ink(staff_fixture(10.0, [40, 130], width=400)))
    staves = locate_staves(feats)
    assert [round(st.center) for st in staves] == [60, 150]


def test_barline_rows_exact():
    img = np.zeros((400, 300), np.float32)
    r1, r2 = 100, 260
    for x in (50, 150, 250):
        img[r1:r2 + 1, x:x + 2] = 1.0
    sums = compute_barline_features(img).row_sums
    assert len(sums) == 400
    assert np.all(sums[r1:r2 + 1] > 0)
    assert not sums[:r1].any() and not sums[r2 + 1:].any()


def test_short_stems_removed():
    img = np.zeros((300, 300), np.float32)
    for x in range(20, 280, 30):
        img[100:135, x:x + 2] = 1.0
    assert not compute_barline_features(img).row_sums.any()


# projection

def test_staff_position_rounding():
    assert staff_position(100.0, 100.0, 10.0) == 0
    assert staff_position(95.0, 100.0, 10.0) == 1
    assert staff_position(97.5, 100.0, 10.0) == 0   # tie goes toward the middle line
    assert staff_position(102.5, 100.0, 10.0) == 0
    assert staff_position(130.0, 100.0, 10.0) == -6
    assert position_row(0, True) == (39, False)
    assert position_row(0, False) == (17, False)
    assert position_row(40, True) == (61, True)


def test_merge_columns():
    groups = merge_columns(np.array([0.0, 5.0, 10.0, 10.5, 30.0]), 10.0)
    assert [g.tolist() for g in groups] == [[0, 1, 2], [3], [4]]


def _project(page):
    pre = preprocess(page.image)
    return project_page(detect_noteheads(pre.image), compute_staffline_features(pre.image),
                        compute_barline_features(pre.image))


def test_no_blobs_gives_empty_fragment():
    page = one_event_page()
    pre = preprocess(page.image)
    frag = project_page([], compute_staffline_features(pre.image), compute_barline_features(pre.image))
    assert frag.width == 0


def test_b4_on_upper_middle_line():
    frag = _project(one_event_page(rh=Part((0,))))
    assert frag.fingerprints.tolist() == [1 << 39]


def test_c4_mirrored_into_left_hand():
    frag = _project(one_event_page(rh=Part((-6,))))
    assert frag.fingerprints.tolist() == [(1 << 33) | (1 << 23)]


def test_odd_staff_count_raises():
    img = staff_fixture(10.0, [40, 130, 220], width=400)
    x = ink(img)
    cv2.circle(x, (200, 60), 5, 1.0, -1)
    with pytest.raises(StaffPairingError, match="60"):
        project_page([NoteheadBlob(200.0, 60.0, 11, 9)], compute_staffline_features(x), compute_barline_features(x))


def test_clamped_positions_counted():
    page = one_event_page(rh=Part((0,)))
    pre = preprocess(page.image)
    feats, bars = compute_staffline_features(pre.image), compute_barline_features(pre.image)
    staves = locate_staves(feats)
    far_above = staves[0].center - 13 * staves[0].spacing   # 26 half-spaces above B4, past C8
    proj = project_page_details([NoteheadBlob(300.0, far_above, 11, 9)], feats, bars)
    assert proj.stats["clamped"] == 1
    assert proj.score.fingerprints.tolist() == [1 << 61]


# whole pipeline

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_clean_page_matches_ground_truth(seed):
    page = synthetic_page(seed)
    got = page_bootleg(page.image).fingerprints.tolist()
    assert got == page.columns
    assert mirror_closed(got)


def test_deterministic():
    img = degrade(synthetic_page(7).image, np.random.default_rng(0))
    assert page_bootleg(img) == page_bootleg(img)


def test_every_column_has_a_bit():
    img = degrade(synthetic_page(8).image, np.random.default_rng(1))
    assert np.all(page_bootleg(img).fingerprints > 0)


def test_scale_covariance():
    rng = np.random.default_rng(9)
    content = random_page_content(rng)
    a = page_bootleg(render_page(content, 10.0).image).fingerprints.tolist()
    b = page_bootleg(render_page(content, 15.0).image).fingerprints.tolist()
    matched = sum(m.size for m in difflib.SequenceMatcher(None, a, b, autojunk=False).get_matching_blocks())
    assert len(a) - matched <= 0.02 * len(a)


def test_reading_order():
    page = synthetic_page(3)
    res = analyze_page(page.image)
    systems = [k for k, _ in res.projection.columns]
    assert systems == sorted(systems)
    xs_by_system = {}
    for k, members in res.projection.columns:
        xs_by_system.setdefault(k, []).append(min(n.blob.center_x for n in members))
    assert all(xs == sorted(xs) for xs in xs_by_system.values())


def test_piece_concatenation_and_order():
    p1, p2 = synthetic_page(10, n_systems=2), synthetic_page(11, n_systems=3)
    f1, f2 = page_bootleg(p1.image), page_bootleg(p2.image)
    both = piece_bootleg([p1.image, p2.image])
    assert both.width == f1.width + f2.width
    assert both.fingerprints[:f1.width].tolist() == f1.fingerprints.tolist()
    rev = piece_bootleg([p2.image, p1.image])
    assert sorted(rev.fingerprints.tolist()) == sorted(both.fingerprints.tolist())
    assert rev.fingerprints.tolist() != both.fingerprints.tolist()


def test_failed_pages_skipped(caplog):
    blank = np.full((400, 300), 255, np.uint8)
    page = synthetic_page(12, n_systems=1)
    assert piece_bootleg([blank, page.image]) == page_bootleg(page.image)
    assert "page 1 skipped" in caplog.text
    with pytest.raises(EmptyPieceError):
        piece_bootleg([blank, blank])
    with pytest.raises(EmptyPieceError):
        piece_bootleg([])


def test_parallel_pages_match_serial():
    pages = [synthetic_page(s, n_systems=1).image for s in (20, 21, 22)]
    assert piece_bootleg(pages, jobs=2) == piece_bootleg(pages)


# hyperparameters

def test_params_roundtrip():
    assert parse_params(format_params()) == DEFAULTS
    custom = DEFAULTS.with_(canonical_spacing=12.0)
    assert parse_params(format_params(custom)) == custom


def test_params_errors():
    text = format_params()
    missing = "\n".join(l for l in text.splitlines() if not l.startswith("canonical_spacing"))
    with pytest.raises(ParamsError, match=r"canonical_spacing.*documented default: 10"):
        parse_params(missing)
    with pytest.raises(ParamsError, match="unknown"):
        parse_params(text + "\nmystery = 1\n")
    with pytest.raises(ParamsError):
        parse_params(text.replace("canonical_spacing = 10.0", "canonical_spacing = ten"))
