"""Alternating four-arm probabilities against the inner scale.

Estimates P(four alternating arms from S(s) to S(n)) at p = q = 1/2 for a few
inner scales and fits the log-log slope.  Small sample counts keep this to
well under a minute; the acceptance suite runs the full-size version.

    python demos/four_arm_exponent.py [samples]
"""

import sys

from ipsplice.arms import ArmEventSpec, estimate_arm_probability
from ipsplice.cli import loglog_slope

samples = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
n = 64
ss = [2, 4, 8, 16]
ests = [estimate_arm_probability(ArmEventSpec(0.5, 0.5, s, n), samples, seed=s) for s in ss]
for s, e in zip(ss, ests):
    print(f"s = {s:>2}: {e.estimate:.4f}  [{e.lower:.4f}, {e.upper:.4f}]")
fit = loglog_slope(ss, n, ests)
print(f"slope {fit['slope']:.3f}, 95% interval [{fit['lower95']:.3f}, {fit['upper95']:.3f}]")
