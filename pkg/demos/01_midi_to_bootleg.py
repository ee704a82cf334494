"""
From MIDI bytes to bootleg columns
==================================

A MIDI file says which keys were pressed. Sheet music says where noteheads
sit on a staff. The bootleg score is the common ground: a 62-row binary
matrix with one row per staff position of a grand staff and one column per
note event. This script walks one tiny MIDI file through that conversion.
"""

import struct

import numpy as np

from bootlegsearch import AccidentalMode, extract_midi_features, group_note_events, parse_midi, project_pitch
from bootlegsearch.bootleg import position_name, unpack_fingerprint

# A standard MIDI file built by hand: one track, 480 ticks per beat and the
# default tempo, so one beat lasts half a second. The chord C4-E4-G4 is
# played at t=0, then C#4 alone one beat later.


def note_on(delta, pitch):
    return bytes([delta & 0x7F, 0x90, pitch, 80])


track = note_on(0, 60) + note_on(0, 64) + note_on(0, 67)
track += bytes([0x83, 0x60, 0x90, 61, 80])        # delta 480 as a variable-length quantity
track += b"\x00\xff\x2f\x00"                       # end of track
smf = b"MThd" + struct.pack(">IHHH", 6, 0, 1, 480) + b"MTrk" + struct.pack(">I", len(track)) + track

onsets = parse_midi(smf)
print("onsets:", onsets)

# Onsets closer than 50 ms collapse into one note event.
events = group_note_events(onsets)
print("events:", [(e.event_time, sorted(e.pitches)) for e in events])

# A black key has two spellings. C#4 sits on the C line, Db4 on the D line,
# so every MIDI file is turned into a sharp and a flat bootleg score.
for mode in AccidentalMode:
    rows = sorted(project_pitch(61, mode))
    print(f"pitch 61 ({mode.value}) -> rows {rows}", [position_name(r) for r in rows])

# Notes between E3 and G4 can be written in either hand, so they get a row in
# both the left-hand and the right-hand block. That is why a single pitch can
# set two bits.
feats = extract_midi_features(smf)
print(feats.stats())
for fp_sharp, fp_flat in zip(feats.sharp.fingerprints.tolist(), feats.flat.fingerprints.tolist()):
    bits = np.flatnonzero(unpack_fingerprint(fp_sharp))
    print(f"sharp {fp_sharp:#018x} flat {fp_flat:#018x}  rows {bits.tolist()}")

# Each column is packed into a 64-bit integer (bit i = row i). Those integers
# are what the reverse index hashes on.
matrix = feats.sharp.matrix
print("matrix shape:", matrix.shape, "set bits per column:", matrix.sum(axis=0).tolist())
