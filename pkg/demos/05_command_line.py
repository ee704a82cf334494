"""
End to end with the command line
================================

Six tiny "pieces" are rendered as page images, and the same notes are
written out as MIDI files. The command line then extracts a bootleg score
from every page, indexes them, and finds each piece from its MIDI file.
The equivalent shell commands are printed as they run.

Everything is written to ``demo_output/cli/``.
"""

import shlex
import struct
from pathlib import Path

import cv2
import numpy as np

from bootlegsearch.cli import main
from bootlegsearch.sheet.render import degrade, random_page_content, render_page

out = Path("demo_output/cli")
out.mkdir(parents=True, exist_ok=True)

WHITE = [0, 2, 4, 5, 7, 9, 11]


def pitch_of(position, upper, sharp):
    # half-spaces above the middle line: B4 for the treble staff, D3 for the bass
    step = (4 * 7 + 6 if upper else 3 * 7 + 1) + position
    octave, letter = divmod(step, 7)
    return 12 * (octave + 1) + WHITE[letter] + int(sharp)


def write_midi(path, chords, ticks=240):
    """Format-0 file, one chord every ``ticks`` (an eighth note at 120 bpm)."""
    body = b""
    for i, chord in enumerate(chords):
        for j, p in enumerate(sorted(chord)):
            delta = ticks if i and not j else 0
            body += bytes([0x81, 0x70]) if delta else b"\x00"
            body += bytes([0x90, p, 80])
    body += b"\x00\xff\x2f\x00"
    path.write_bytes(b"MThd" + struct.pack(">IHHH", 6, 0, 1, 480) + b"MTrk" + struct.pack(">I", len(body)) + body)


def run(*args):
    print("$ bootlegsearch " + " ".join(shlex.quote(str(a)) for a in args))
    code = main([str(a) for a in args])
    assert code == 0, code


manifest, truth = [], []
for i in range(6):
    rng = np.random.default_rng(100 + i)
    content = random_page_content(rng, n_systems=3)
    page = degrade(render_page(content, spacing=float(rng.uniform(9, 15))).image, rng)
    cv2.imwrite(str(out / f"piece{i}.png"), page)
    # every notehead the page shows, hollow ones included, in reading order
    chords = []
    for events in content.systems:
        for ev in events:
            chord = set()
            for part, upper in ((ev.rh, True), (ev.lh, False)):
                if part is not None:
                    chord |= {pitch_of(p, upper, part.accidental and p == part.positions[0]) for p in part.positions}
            chords.append(chord)
    write_midi(out / f"piece{i}.mid", chords)
    run("extract-sheet", out / f"piece{i}.png", "-o", out / f"piece{i}.bls")
    manifest.append(f"piece{i}\tpiece{i}.bls")
    truth.append(f"piece{i}.mid\tpiece{i}")

(out / "db.tsv").write_text("\n".join(manifest) + "\n")
(out / "truth.tsv").write_text("\n".join(truth) + "\n")
run("build-index", out / "db.tsv", out / "index.bin")

# The MIDI side needs both spellings; extract-midi writes them side by side.
run("extract-midi", out / "piece3.mid", out / "piece3.sharp.bls", out / "piece3.flat.bls")
run("query", out / "index.bin", out / "piece3.mid", "--top-k", "3")

(out / "eval.cfg").write_text(
    "database = db.tsv\n"
    "ground_truth = truth.tsv\n"
    "db_sizes = 3, 6\n"
    "query_lengths = 10, 20, full\n"
    "trials = 3\n"
    "samples_per_midi = 5\n"
    "output = report/run\n"
)
run("evaluate", out / "eval.cfg")
print("reports:", sorted(p.name for p in (out / "report").iterdir()))
