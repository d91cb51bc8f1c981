"""
Assigning multi-F0 estimates to voices
======================================

A multi-pitch tracker reports, for each frame, an unordered set of
pitches.  Before separation they must be attributed to voices.  The
heuristic sorts a full frame from high to low, and otherwise keeps each
pitch with the voice whose recent value is closest, so voices neither
cross nor jump.
"""

# %%
import numpy as np

from sfsep.f0 import MultiF0Frame, assign_f0s, hz_to_midi

# %%
# Two voices; the lower one drops out for a few frames and a spurious
# third pitch shows up once.
rows = [[440, 220], [445, 222], [450], [452], [455, 230], [458, 231, 700], [460, 233]]
frames = [MultiF0Frame(0.016 * n, r) for n, r in enumerate(rows)]
tracks = assign_f0s(frames, 2)
for n, r in enumerate(rows):
    print(f"frame {n}: detected {r!s:18} -> voices {tracks[:, n]}")

# %%
# Pitches are compared in Hz during assignment; MIDI numbers are handy for
# reading them.
print(np.round(hz_to_midi(tracks[tracks > 0]), 2))
