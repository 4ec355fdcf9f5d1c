"""Monte Carlo estimates with confidence intervals."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["EstimateWithCI", "wilson", "wald_mean", "Z95"]

Z95 = 1.959963984540054


@dataclass(frozen=True)
class EstimateWithCI:
    """A point estimate with its standard error and a 95% interval.

    For proportions (``method == "wilson"``) the interval is the Wilson
    score interval and ``stderr`` is its half-width divided by the normal
    quantile, so it stays positive at 0 or ``samples`` successes.
    """

    estimate: float
    stderr: float
    samples: int
    method: str
    seed: int
    lower: float
    upper: float
    successes: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)

    def differs_from(self, other: "EstimateWithCI", k: float = 2.0) -> float:
        """Signed difference in units of the combined standard error."""
        se = math.hypot(self.stderr, other.stderr)
        d = self.estimate - other.estimate
        if se == 0:
            return math.inf * np.sign(d) if d else 0.0
        return d / se


def wilson(successes: int, samples: int, seed: int = 0, z: float = Z95) -> EstimateWithCI:
    if samples < 1:
        raise ValueError("need at least one sample")
    if not 0 <= successes <= samples:
        raise ValueError("successes out of range")
    n = samples
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return EstimateWithCI(
        estimate=phat,
        stderr=half / z,
        samples=n,
        method="wilson",
        seed=int(seed),
        lower=0.0 if successes == 0 else max(0.0, centre - half),
        upper=1.0 if successes == n else min(1.0, centre + half),
        successes=int(successes),
    )


def wald_mean(values, seed: int = 0, z: float = Z95) -> EstimateWithCI:
    """Sample mean with the usual normal-approximation interval."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 1:
        raise ValueError("need at least one sample")
    m = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateWithCI(m, se, n, "wald", int(seed), m - z * se, m + z * se)
