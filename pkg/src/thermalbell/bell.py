"""CH74 Bell-statistic evaluation for the probability sets of this toolkit.

The inequality used is the probability form
    -1 <= P(a,b) - P(a,b') + P(a',b) + P(a',b') - P1(a') - P1(b) <= 0,
evaluated with the joint probabilities carrying a fringe
(1 +- V cos(argument))/N.  Canonical extremal angle choices drive the
four-cosine bracket to +-2*sqrt(2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import visibility_tls

# Strict-inequality guard: a bound counts as violated only when exceeded by
# more than this, so violation claims never ride on rounding.
GUARD_BAND = 1e-12

LOWER_BOUND = -1.0
UPPER_BOUND = 0.0

BRACKET_MAX = 2.0 * math.sqrt(2.0)


class BellModel(str, enum.Enum):
    """Which probability normalization feeds the statistic.

    The six-term variants normalize over all six detector pairs (second-order
    schemes, SPE or thermal); the four-term variant normalizes over the four
    cross pairs of the post-selected (m+1)-photon scheme.
    """

    SIX_TERM_SPE = "six_term_spe"
    SIX_TERM_TLS = "six_term_tls"
    FOUR_TERM_TLS = "four_term_tls"


class Bound(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class AngleSet:
    """The four cosine arguments entering the Bell bracket.

    These are the phase differences (d1-d2, d1-d2', d1'-d2, d1'-d2'), carried
    directly rather than as individual detector phases: only differences enter
    the statistic, and storing arguments avoids fixing the free gauge.  Use
    :func:`detector_phases` to obtain one consistent detector realization.
    """

    d1_d2: float
    d1_d2p: float
    d1p_d2: float
    d1p_d2p: float

    @property
    def arguments(self) -> tuple[float, float, float, float]:
        return (self.d1_d2, self.d1_d2p, self.d1p_d2, self.d1p_d2p)

    def bracket(self) -> float:
        """cos(t1) - cos(t2) + cos(t3) + cos(t4); bounded by +-2*sqrt(2)."""
        t1, t2, t3, t4 = self.arguments
        return math.cos(t1) - math.cos(t2) + math.cos(t3) + math.cos(t4)


UPPER_ANGLES = AngleSet(math.pi / 4, 3 * math.pi / 4, math.pi / 4, math.pi / 4)
LOWER_ANGLES = AngleSet(3 * math.pi / 4, math.pi / 4, 3 * math.pi / 4, 3 * math.pi / 4)


@dataclass
class BellReport:
    """Outcome of one Bell-statistic evaluation."""

    statistic: float
    violates_lower: bool
    violates_upper: bool
    model_tag: BellModel
    visibility_used: float
    lower_bound: float = LOWER_BOUND
    upper_bound: float = UPPER_BOUND

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "violates_lower": self.violates_lower,
            "violates_upper": self.violates_upper,
            "model_tag": self.model_tag.value,
            "visibility_used": self.visibility_used,
        }


def default_angles(bound: Bound) -> AngleSet:
    """Canonical extremal cosine-argument tuples.

    Upper: (pi/4, 3pi/4, pi/4, pi/4), bracket +2*sqrt(2).
    Lower: (3pi/4, pi/4, 3pi/4, 3pi/4), bracket -2*sqrt(2).
    """
    return UPPER_ANGLES if Bound(bound) is Bound.UPPER else LOWER_ANGLES


def ch74_middle(x: float, xp: float, y: float, yp: float,
                joints: tuple[float, float, float, float]) -> float:
    """Middle expression of the CH74 inequality with X = Y = 1.

    ``joints`` are the four joint probabilities ordered (xy, xy', x'y, x'y').
    Only xp and y of the marginals enter the expression; all six inputs are
    still validated as probabilities.
    """
    for name, p in (("x", x), ("xp", xp), ("y", y), ("yp", yp)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"marginal {name} must lie in [0, 1], got {p}")
    if len(joints) != 4:
        raise ValueError("exactly four joint probabilities required")
    for p in joints:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"joint probability must lie in [0, 1], got {p}")
    j1, j2, j3, j4 = joints
    return j1 - j2 + j3 + j4 - xp - y


def _check_vis(visibility: float) -> float:
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    return float(visibility)


def statistic_value(model_tag: BellModel, visibility: float, bracket: float) -> float:
    """Closed-form statistic for a given cosine bracket.

    Six-term: V*B/(6-2V) + 2/(6-2V) - 1.   Four-term: V*B/4 - 1/2.
    The two agree exactly at V = 1.
    """
    if BellModel(model_tag) is BellModel.FOUR_TERM_TLS:
        return visibility * bracket / 4.0 - 0.5
    denom = 6.0 - 2.0 * visibility
    return (visibility * bracket + 2.0) / denom - 1.0


def bell_statistic(model_tag: BellModel, visibility: float, angles: AngleSet) -> BellReport:
    """Evaluate the CH74 statistic for the given normalization and angles."""
    visibility = _check_vis(visibility)
    value = statistic_value(model_tag, visibility, angles.bracket())
    return BellReport(
        statistic=value,
        violates_lower=value < LOWER_BOUND - GUARD_BAND,
        violates_upper=value > UPPER_BOUND + GUARD_BAND,
        model_tag=BellModel(model_tag),
        visibility_used=visibility,
    )


def threshold_visibility(model_tag: BellModel, bound: Bound) -> float:
    """Least visibility violating the given bound at the extremal angles.

    Six-term: 2/(1+sqrt(2)) for the upper bound, 1/sqrt(2) for the lower.
    Four-term: 1/sqrt(2) for either bound (the four-term statistic is odd in
    the bracket around -1/2, so both bounds give the same threshold).
    """
    if BellModel(model_tag) is BellModel.FOUR_TERM_TLS:
        return 1.0 / math.sqrt(2.0)
    if Bound(bound) is Bound.UPPER:
        return 2.0 / (1.0 + math.sqrt(2.0))
    return 1.0 / math.sqrt(2.0)


def min_violating_m(max_m: int = 64) -> int:
    """Smallest m whose (m+1)-th order thermal visibility m/(m+2) violates the
    four-term inequality at the extremal angles."""
    threshold = threshold_visibility(BellModel.FOUR_TERM_TLS, Bound.UPPER)
    for m in range(1, max_m + 1):
        if visibility_tls(m) > threshold:
            return m
    raise RuntimeError(f"no violating m found up to {max_m}")  # pragma: no cover


def angle_scan(model_tag: BellModel, visibility: float,
               grid_step: float) -> list[tuple[AngleSet, float]]:
    """Exhaustive grid scan of the realizable cosine-argument tuples.

    The four arguments are differences of four detector phases, so only three
    are free: t4 = t2 + t3 - t1.  The scan walks the first three over
    [0, 2pi) and returns the extremal entries
    [(angles_at_max, max), (angles_at_min, min)].  It independently confirms
    that the canonical tuples are extremal: over realizable tuples the
    bracket never exceeds 2*sqrt(2) in magnitude.
    """
    if grid_step <= 0:
        raise ValueError(f"grid_step must be > 0, got {grid_step}")
    visibility = _check_vis(visibility)
    n = int(round(2.0 * math.pi / grid_step))
    grid = np.arange(n) * grid_step
    cos = np.cos(grid)
    t4 = grid[None, :, None] + grid[None, None, :] - grid[:, None, None]
    bracket = (cos[:, None, None] - cos[None, :, None]
               + cos[None, None, :] + np.cos(t4))
    if BellModel(model_tag) is BellModel.FOUR_TERM_TLS:
        stat = visibility * bracket / 4.0 - 0.5
    else:
        stat = (visibility * bracket + 2.0) / (6.0 - 2.0 * visibility) - 1.0
    flat_max = int(np.argmax(stat))
    flat_min = int(np.argmin(stat))
    out = []
    for flat in (flat_max, flat_min):
        i, j, k = np.unravel_index(flat, stat.shape)
        angles = AngleSet(float(grid[i]), float(grid[j]), float(grid[k]),
                          float(t4[i, j, k] % (2.0 * math.pi)))
        out.append((angles, float(stat[i, j, k])))
    return out


def detector_phases(angles: AngleSet, tol: float = 1e-9) -> tuple[float, float, float, float]:
    """One detector-phase realization (d1, d1', d2, d2') of an argument tuple.

    Signed arguments must satisfy t1 - t2 - t3 + t4 = 0; since only cosines
    enter, each argument may be negated freely and shifted by 2pi.  The search
    over sign choices and one winding number finds a consistent assignment
    with d1 = 0 (the overall gauge is free).
    """
    t1, t2, t3, t4 = angles.arguments
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            for s3 in (1.0, -1.0):
                for s4 in (1.0, -1.0):
                    residual = s1 * t1 - s2 * t2 - s3 * t3 + s4 * t4
                    k = round(residual / (2.0 * math.pi))
                    if abs(residual - 2.0 * math.pi * k) > tol:
                        continue
                    d1 = 0.0
                    d2 = -s1 * t1
                    d2p = -s2 * t2
                    d1p = s3 * t3 + d2
                    realized = (d1 - d2, d1 - d2p, d1p - d2, d1p - d2p)
                    if all(abs(math.cos(r) - math.cos(t)) <= 1e-9
                           for r, t in zip(realized, angles.arguments)):
                        return (d1, d1p, d2, d2p)
    raise ValueError(f"no consistent detector realization for arguments {angles.arguments}")
