"""Where the invaded weights sit late in an invasion.

Grows one invasion for 10^5 steps and prints, window by window, the largest
weight invaded in that window.  Away from the early steps the maxima hover
just under 1/2: outlets above 1/2 become rare as the cluster grows.

    python demos/invasion_tail.py [seed] [steps]
"""

import sys

import numpy as np

from ipsplice.invasion import StopRule, invade, invaded_weight_tail
from ipsplice.weights import sample_box

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 100_000

res = invade(sample_box(1024, seed), StopRule(max_steps=steps))
print(f"{len(res)} steps, max distance {res.max_distance()}, truncated={res.truncated}")

windows = np.array_split(res.weights, 10)
start = 0
for w in windows:
    above = int((w > 0.5).sum())
    print(f"steps {start + 1:>7}-{start + len(w):>7}: max {w.max():.4f}, {above} weights above 1/2")
    start += len(w)

for frac in (0.1, 0.5, 1.0):
    print(f"max over last {frac:.0%}: {invaded_weight_tail(res, frac):.4f}")
