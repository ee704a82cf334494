"""
Reading a page of sheet music
=============================

The sheet side never tries full music recognition. It only needs filled
noteheads, the staff lines they sit on, and which staves belong together.
This script renders a synthetic piano page, roughens it up like a scan,
runs it through the pipeline and writes an annotated overlay.

Output goes to ``demo_output/`` in the current directory.
"""

import difflib
from pathlib import Path

import cv2
import numpy as np

from bootlegsearch.sheet import DEFAULTS, analyze_page, draw_overlay, piece_bootleg
from bootlegsearch.sheet.render import degrade, synthetic_page

out = Path("demo_output")
out.mkdir(exist_ok=True)

# A page with four grand-staff systems at 13 px between staff lines. The
# renderer also returns the ground-truth columns it drew.
page = synthetic_page(seed=3, spacing=13.0)
scan = degrade(page.image, np.random.default_rng(0))
cv2.imwrite(str(out / "page.png"), scan)
print("page", scan.shape, "ground-truth columns:", len(page.columns))

# analyze_page runs the whole chain:
#   background removal, then interline normalisation to 10 px
#   notehead blobs from a circular opening, Otsu and connected components
#   staff lines via a 5-tooth comb filter bank
#   barline row sums to pair staves into systems
#   staff positions of each blob, merged into columns
res = analyze_page(scan)
print(f"estimated spacing {res.spacing:.2f} px, rescaled by {res.scale:.3f}")
print("stats:", res.stats)

got = res.score.fingerprints.tolist()
sm = difflib.SequenceMatcher(None, page.columns, got, autojunk=False)
matched = sum(b.size for b in sm.get_matching_blocks())
print(f"columns matching ground truth: {matched}/{len(page.columns)}")

overlay = draw_overlay(res)
cv2.imwrite(str(out / "overlay.png"), cv2.cvtColor(overlay, cv2.COLOR_RGB2BGR))
print("overlay written to", out / "overlay.png")

# A piece is the concatenation of its pages. A page with no staves (a blank
# title page here) is logged and contributes nothing.
blank = np.full((600, 400), 255, np.uint8)
pages = [blank, scan, degrade(synthetic_page(seed=4, spacing=13.0).image, np.random.default_rng(1))]
piece = piece_bootleg(pages)
print("piece width:", piece.width)

# Every setting of the pipeline lives in one hyperparameter record.
print("canonical spacing:", DEFAULTS.canonical_spacing, "| comb range:",
      DEFAULTS.min_line_spacing, "-", DEFAULTS.max_line_spacing)
