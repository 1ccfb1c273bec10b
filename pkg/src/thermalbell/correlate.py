"""Estimators of normalized higher-order correlations from frame stacks.

The central quantity is
    ghat(x2) = < prod_i I(x1, y_i) * I(x2, y2) >_frames
               / ( prod_i <I(x1, y_i)> * <I(x2, y2)> ),
the (m+1)-th order correlation normalized by first-order averages, estimated
in a single pass with compensated accumulation.  Error bars come from a block
bootstrap over frames (frames may carry residual temporal correlation).
Visibility is extracted by weighted least squares against
A * (1 + V cos(delta(x2) - phi)) with the fringe period fixed by geometry.

``bell_from_frames`` measures the four joint quantities of the post-selected
(m+1)-photon scheme at pixels realizing the Bell cosine arguments, normalizes
them per setting (four-term normalization), and evaluates the CH74 statistic.
Because the inequality holds for arbitrary angles, the statistic is evaluated
at the phases the pixel grid actually achieves; violation is asserted only
when the bound is exceeded by at least two standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .bell import (BellModel, LOWER_BOUND, UPPER_BOUND, AngleSet,
                   detector_phases)
from .errors import (InsufficientFramesError, PeriodCoverageError,
                     SamplingGuardError)
from .speckle import FrameSet, Geometry
from . import spkl

MIN_FRAMES = 100
DEFAULT_BLOCK_LEN = 64
DEFAULT_N_BOOT = 200


@dataclass
class CorrelationCurve:
    """Estimated normalized correlation versus the scanned detector column."""

    m: int
    x2_positions: np.ndarray      # pixel columns
    values: np.ndarray            # ghat estimates, >= 0
    stderr: np.ndarray            # block-bootstrap standard errors
    n_frames_used: int


@dataclass
class VisibilityEstimate:
    """Fringe visibility from a correlation curve fit.

    ``fit_residual`` is the RMS fit residual relative to the fitted midline.
    The estimate and its standard error may straddle a Bell threshold; callers
    must propagate the uncertainty rather than compare point values.
    """

    value: float
    stderr: float
    fit_residual: float


@dataclass
class FrameBellReport:
    """CH74 evaluation from measured frames.

    ``statistic`` averages the estimates over the pixel realizations used;
    flags assert violation only beyond two standard errors.  ``achieved``
    records, per realization, the cosine arguments the pixel grid realized.
    """

    statistic: float
    stderr: float
    violates_lower: bool
    violates_upper: bool
    model_tag: BellModel
    visibility_used: float
    n_frames: int
    n_realizations: int
    m: int
    achieved: list[dict] = field(default_factory=list)
    lower_bound: float = LOWER_BOUND
    upper_bound: float = UPPER_BOUND

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "stderr": self.stderr,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "violates_lower": self.violates_lower,
            "violates_upper": self.violates_upper,
            "model_tag": self.model_tag.value,
            "visibility_used": self.visibility_used,
            "n_frames": self.n_frames,
            "n_realizations": self.n_realizations,
            "m": self.m,
            "achieved": self.achieved,
        }


FrameSource = FrameSet | str | Path


def _source_shape(source: FrameSource) -> tuple[int, int, int]:
    if isinstance(source, FrameSet):
        return source.pixels.shape
    header = spkl.read_header(source)
    return header.n_frames, header.height, header.width


def _iter_source(source: FrameSource, chunk: int = 4096) -> Iterator[np.ndarray]:
    if isinstance(source, FrameSet):
        for start in range(0, source.pixels.shape[0], chunk):
            yield source.pixels[start:start + chunk]
    else:
        yield from spkl.iter_spkl(source, chunk)


def collect_cells(source: FrameSource,
                  cells: Sequence[tuple[int, int]]) -> np.ndarray:
    """Per-frame values of the listed (column, row) pixels, shape [N, n_cells].

    Single sequential pass over the source; float64 output.
    """
    n_frames, height, width = _source_shape(source)
    cols = np.array([c for c, _ in cells], dtype=int)
    rows = np.array([r for _, r in cells], dtype=int)
    if np.any((cols < 0) | (cols >= width)):
        raise ValueError(f"column index out of range [0, {width})")
    if np.any((rows < 0) | (rows >= height)):
        raise ValueError(f"row index out of range [0, {height})")
    out = np.empty((n_frames, len(cells)), dtype=np.float64)
    start = 0
    for block in _iter_source(source):
        out[start:start + block.shape[0]] = block[:, rows, cols]
        start += block.shape[0]
    return out


def _row_products(values: np.ndarray) -> np.ndarray:
    """Products along axis 1 in a canonical (sorted) factor order.

    Sorting makes the result invariant under permutation of the chosen rows.
    Rows whose direct product over/underflows despite all-positive factors are
    recomputed in the log domain.
    """
    v = np.sort(np.asarray(values, dtype=np.float64), axis=1)
    p = np.prod(v, axis=1)
    bad = ~np.isfinite(p) | ((p == 0) & np.all(v > 0, axis=1))
    if np.any(bad):
        p[bad] = np.exp(np.sum(np.log(v[bad]), axis=1))
    return p


def _sorted_prod(values: np.ndarray) -> float:
    """Product in ascending order, so factor permutations cannot change the
    rounding."""
    return float(np.prod(np.sort(values)))


def _block_layout(n: int, block_len: int) -> tuple[np.ndarray, np.ndarray]:
    starts = np.arange(0, n, block_len)
    counts = np.diff(np.append(starts, n)).astype(float)
    return starts, counts


def _block_sums(arr: np.ndarray, block_len: int) -> np.ndarray:
    starts = np.arange(0, arr.shape[0], block_len)
    return np.add.reduceat(arr, starts, axis=0)


def _fsum_columns(block_sums: np.ndarray) -> np.ndarray:
    if block_sums.ndim == 1:
        return np.array(math.fsum(block_sums))
    return np.array([math.fsum(block_sums[:, j]) for j in range(block_sums.shape[1])])


def _check_frames(n_frames: int) -> None:
    if n_frames < MIN_FRAMES:
        raise InsufficientFramesError(
            f"{n_frames} frames; at least {MIN_FRAMES} required")


def estimate_gm1(source: FrameSource, m: int, x1: int,
                 y1_rows: Sequence[int], x2_scan: Sequence[int], y2: int,
                 *, n_boot: int = DEFAULT_N_BOOT,
                 block_len: int = DEFAULT_BLOCK_LEN, boot_seed: int = 0,
                 shuffle: bool = False) -> CorrelationCurve:
    """Normalized (m+1)-th order correlation over a scan of x2 columns.

    m pixels sit at column x1 on the distinct rows ``y1_rows``; the single
    second-side pixel scans ``x2_scan`` on row ``y2``.  ``shuffle`` pairs the
    x1 product of frame i with the x2 values of frame i+1, destroying genuine
    correlations (control estimator).
    """
    n_frames, height, width = _source_shape(source)
    _check_frames(n_frames)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    y1_rows = list(y1_rows)
    if len(y1_rows) != m:
        raise ValueError(f"need exactly m={m} rows at x1, got {len(y1_rows)}")
    if len(set(y1_rows)) != m:
        raise ValueError("y1_rows must be distinct")
    x2_scan = list(x2_scan)
    if not x2_scan:
        raise ValueError("x2_scan must be nonempty")
    if y2 in y1_rows and x1 in x2_scan:
        raise ValueError(
            f"x2 scan hits column {x1} on row {y2}, which is already used as an "
            "x1 pixel; choose a different y2 row")

    cells = [(x1, r) for r in y1_rows] + [(c, y2) for c in x2_scan]
    data = collect_cells(source, cells)
    x1_vals = data[:, :m]
    x2_vals = data[:, m:]
    if shuffle:
        x2_vals = np.roll(x2_vals, -1, axis=0)
    products = _row_products(x1_vals)

    num_blocks = _block_sums(products[:, None] * x2_vals, block_len)
    x1_blocks = _block_sums(x1_vals, block_len)
    x2_blocks = _block_sums(x2_vals, block_len)

    n = float(n_frames)
    num_mean = _fsum_columns(num_blocks) / n
    x1_mean = _fsum_columns(x1_blocks) / n
    x2_mean = _fsum_columns(x2_blocks) / n
    values = num_mean / (_sorted_prod(x1_mean) * x2_mean)

    _, counts = _block_layout(n_frames, block_len)
    nb = num_blocks.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence((boot_seed, 0xB00727)))
    boot = np.empty((n_boot, len(x2_scan)))
    for r in range(n_boot):
        idx = rng.integers(0, nb, nb)
        n_star = counts[idx].sum()
        x1_m = x1_blocks[idx].sum(axis=0) / n_star
        boot[r] = (num_blocks[idx].sum(axis=0) / n_star) / (
            _sorted_prod(x1_m) * (x2_blocks[idx].sum(axis=0) / n_star))
    stderr = boot.std(axis=0, ddof=1)

    return CorrelationCurve(m=m, x2_positions=np.array(x2_scan, dtype=int),
                            values=values, stderr=stderr,
                            n_frames_used=n_frames)


def fit_visibility(curve: CorrelationCurve, geom: Geometry) -> VisibilityEstimate:
    """Weighted least-squares visibility of a correlation curve.

    The model A * (1 + V cos(delta - phi)) is linear in
    (A, A V cos phi, A V sin phi); the phase map delta(x2) comes from the
    geometry with the fringe period fixed, so no iterative fitting is needed.
    Requires the scan to span at least one full fringe period.
    """
    delta = geom.phase_map()[curve.x2_positions]
    if delta.max() - delta.min() < 2.0 * math.pi - 1e-9:
        raise PeriodCoverageError(
            f"scan spans {(delta.max() - delta.min()) / (2 * math.pi):.2f} fringe "
            "periods; at least one full period required")
    y = np.asarray(curve.values, dtype=float)
    se = np.asarray(curve.stderr, dtype=float)
    design = np.stack([np.ones_like(delta), np.cos(delta), np.sin(delta)], axis=1)
    if np.all(np.isfinite(se)) and np.all(se > 0):
        w = 1.0 / se**2
    else:
        w = np.ones_like(y)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    c0, c1, c2 = coef
    if c0 <= 0:
        raise PeriodCoverageError(f"degenerate fit: nonpositive midline {c0}")
    gram = design.T @ (design * w[:, None])
    cov = np.linalg.inv(gram)
    r = math.hypot(c1, c2)
    vis = r / c0
    if r > 0:
        grad = np.array([-r / c0**2, c1 / (r * c0), c2 / (r * c0)])
    else:
        grad = np.array([0.0, 1.0 / c0, 1.0 / c0])
    stderr = float(math.sqrt(max(0.0, grad @ cov @ grad)))
    residual = float(np.sqrt(np.mean((y - design @ coef) ** 2)) / c0)
    return VisibilityEstimate(value=float(min(max(vis, 0.0), 1.0)),
                              stderr=stderr, fit_residual=residual)


def _snap_column(phase_map: np.ndarray, target: float) -> tuple[int, float]:
    col = int(np.argmin(np.abs(phase_map - target)))
    return col, float(phase_map[col] - target)


def _partner_column(phase_map: np.ndarray, setting_phase: float) -> tuple[int, float]:
    """Column realizing the pi-shifted partner of a setting, trying both
    directions and keeping the better snap."""
    cand = [_snap_column(phase_map, setting_phase + math.pi),
            _snap_column(phase_map, setting_phase - math.pi)]
    return min(cand, key=lambda ce: abs(ce[1]))


# Per pack: (s setting key, t setting key); packs follow the CH74 joint order
# (d1,d2), (d1,d2'), (d1',d2), (d1',d2').
_PACKS = (("s1", "s2"), ("s1", "s2p"), ("s1p", "s2"), ("s1p", "s2p"))
_PARTNER = {"s1": "p1", "s1p": "p1p", "s2": "p2", "s2p": "p2p"}
_S_KEYS = ("s1", "p1", "s1p", "p1p")
_T_KEYS = ("s2", "p2", "s2p", "p2p")


def _bell_columns(phase_map: np.ndarray, angles: AngleSet, gauge: float,
                  max_snap: float) -> dict[str, int] | None:
    """Pixel columns realizing the four settings plus pi partners at a gauge
    offset, or None when any snap error exceeds ``max_snap``."""
    d1, d1p, d2, d2p = detector_phases(angles)
    targets = {"s1": d1 + gauge, "s1p": d1p + gauge,
               "s2": d2 + gauge, "s2p": d2p + gauge}
    cols: dict[str, int] = {}
    for key, phase in targets.items():
        col, err = _snap_column(phase_map, phase)
        if abs(err) > max_snap:
            return None
        cols[key] = col
        pcol, perr = _partner_column(phase_map, phase_map[col])
        if abs(perr) > max_snap:
            return None
        cols[_PARTNER[key]] = pcol
    return cols


class _BellSums:
    """Column bookkeeping for one pixel realization inside the stacked
    block-sum matrix used by the bootstrap."""

    def __init__(self, num: dict[tuple[str, str], int],
                 rows: dict[str, list[int]], tvals: dict[str, int]):
        self.num = num
        self.rows = rows
        self.tvals = tvals

    def ghat(self, sums: np.ndarray, n_star: float, sk: str, tk: str) -> float:
        num = sums[self.num[(sk, tk)]] / n_star
        rows_mean = sums[self.rows[sk]] / n_star
        t_mean = sums[self.tvals[tk]] / n_star
        return num / (_sorted_prod(rows_mean) * t_mean)

    def statistic(self, sums: np.ndarray, n_star: float) -> float:
        probs = []
        packs = {}
        for sk, tk in _PACKS:
            pk, tkp = _PARTNER[sk], _PARTNER[tk]
            quad = (self.ghat(sums, n_star, sk, tk),
                    self.ghat(sums, n_star, pk, tkp),
                    self.ghat(sums, n_star, sk, tkp),
                    self.ghat(sums, n_star, pk, tk))
            packs[(sk, tk)] = quad
            probs.append(quad[0] / sum(quad))
        quad1 = packs[("s1", "s2")]
        quad3 = packs[("s1p", "s2")]
        marg_1p = (quad3[0] + quad3[2]) / sum(quad3)  # P1(d1'): (d1',d2)+(d1',p2)
        marg_2 = (quad1[0] + quad1[3]) / sum(quad1)   # P1(d2):  (d1,d2)+(p1,d2)
        return probs[0] - probs[1] + probs[2] + probs[3] - marg_1p - marg_2

    def pack_prob_and_arg(self, sums: np.ndarray, n_star: float, sk: str, tk: str,
                          phase_map: np.ndarray, cols: dict[str, int]) -> tuple[float, float]:
        pk, tkp = _PARTNER[sk], _PARTNER[tk]
        quad = (self.ghat(sums, n_star, sk, tk),
                self.ghat(sums, n_star, pk, tkp),
                self.ghat(sums, n_star, sk, tkp),
                self.ghat(sums, n_star, pk, tk))
        arg = float(phase_map[cols[sk]] - phase_map[cols[tk]])
        return quad[0] / sum(quad), arg


def bell_from_frames(source: FrameSource, m: int, angles: AngleSet,
                     geom: Geometry | None = None, *,
                     y1_rows: Sequence[int] | None = None, y2: int | None = None,
                     n_realizations: int = 1, n_boot: int = DEFAULT_N_BOOT,
                     block_len: int = DEFAULT_BLOCK_LEN, boot_seed: int = 0,
                     shuffle: bool = False) -> FrameBellReport:
    """CH74 statistic measured from frames via the four-term scheme.

    For each pixel realization, the four joint quantities of one cosine
    argument are the correlation estimates at the setting pair and at its
    pi-shifted partners; their sum is the four-term normalization, the joint
    probabilities follow, and the single-detector marginals are estimated from
    the same packs.  Multiple realizations of the same argument tuple (the
    tuple fixes only phase differences, so it can be realized anywhere along
    the fringe) are averaged; the block bootstrap resamples frames through the
    full pipeline, capturing all correlations.
    """
    n_frames, height, width = _source_shape(source)
    _check_frames(n_frames)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if geom is None and isinstance(source, FrameSet):
        geom = source.geometry
    if geom is None:
        raise ValueError("geometry required (pass geom= or use a FrameSet with geometry)")
    if y1_rows is None:
        y1_rows = list(range(m))
    else:
        y1_rows = list(y1_rows)
    if len(y1_rows) != m or len(set(y1_rows)) != m:
        raise ValueError(f"y1_rows must be {m} distinct rows")
    if y2 is None:
        y2 = height - 1
    if y2 in y1_rows:
        raise ValueError("y2 must differ from the y1 rows (pixels may share columns)")
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")

    phase_map = geom.phase_map()
    phase_step = float(np.median(np.abs(np.diff(phase_map))))
    max_snap = 0.75 * phase_step

    candidates = np.linspace(phase_map.min(), phase_map.max(), 512)
    usable = [g for g in candidates
              if _bell_columns(phase_map, angles, g, max_snap) is not None]
    if len(usable) < n_realizations:
        raise SamplingGuardError(
            f"only {len(usable)} pixel realizations of the angle tuple fit the "
            f"grid; {n_realizations} requested")
    picks = [usable[i] for i in
             np.linspace(0, len(usable) - 1, n_realizations).round().astype(int)]
    realizations = [_bell_columns(phase_map, angles, g, max_snap) for g in picks]

    # one streaming pass for every needed pixel cell
    cell_index: dict[tuple[int, int], int] = {}
    cells: list[tuple[int, int]] = []

    def _cell(col: int, row: int) -> int:
        key = (col, row)
        if key not in cell_index:
            cell_index[key] = len(cells)
            cells.append(key)
        return cell_index[key]

    for cols in realizations:
        for sk in _S_KEYS:
            for r in y1_rows:
                _cell(cols[sk], r)
        for tk in _T_KEYS:
            _cell(cols[tk], y2)
    data = collect_cells(source, cells)

    # stack every per-frame series whose block sums the statistic needs
    stack_cols: list[np.ndarray] = []
    entries: list[_BellSums] = []

    def _push(series: np.ndarray) -> int:
        stack_cols.append(series)
        return len(stack_cols) - 1

    for cols in realizations:
        prods = {}
        rows_idx: dict[str, list[int]] = {}
        for sk in _S_KEYS:
            vals = data[:, [cell_index[(cols[sk], r)] for r in y1_rows]]
            prods[sk] = _row_products(vals)
            rows_idx[sk] = [_push(vals[:, i]) for i in range(m)]
        t_idx: dict[str, int] = {}
        num_idx: dict[tuple[str, str], int] = {}
        for tk in _T_KEYS:
            tv = data[:, cell_index[(cols[tk], y2)]]
            if shuffle:
                tv = np.roll(tv, -1)
            t_idx[tk] = _push(tv)
            for sk in _S_KEYS:
                num_idx[(sk, tk)] = _push(prods[sk] * tv)
        entries.append(_BellSums(num=num_idx,
                                 rows={k: np.array(v) for k, v in rows_idx.items()},
                                 tvals=t_idx))

    stacked = np.stack(stack_cols, axis=1)          # [N, C]
    blocks = _block_sums(stacked, block_len)        # [nb, C]
    _, counts = _block_layout(n_frames, block_len)
    nb = blocks.shape[0]

    full_sums = _fsum_columns(blocks)
    statistic = float(np.mean([e.statistic(full_sums, float(n_frames))
                               for e in entries]))

    rng = np.random.default_rng(np.random.SeedSequence((boot_seed, 0xBE11)))
    boot = np.empty(n_boot)
    for r in range(n_boot):
        idx = rng.integers(0, nb, nb)
        sums = blocks[idx].sum(axis=0)
        n_star = counts[idx].sum()
        boot[r] = np.mean([e.statistic(sums, n_star) for e in entries])
    stderr = float(boot.std(ddof=1))

    achieved = []
    vis_samples = []
    for cols, entry in zip(realizations, entries):
        args = {}
        for sk, tk in _PACKS:
            prob, arg = entry.pack_prob_and_arg(full_sums, float(n_frames),
                                                sk, tk, phase_map, cols)
            args[f"{sk}-{tk}"] = arg
            if abs(math.cos(arg)) > 0.2:
                vis_samples.append((4.0 * prob - 1.0) / math.cos(arg))
        achieved.append({"gauge_columns": {k: int(v) for k, v in cols.items()},
                         "arguments": args})
    visibility_used = float(np.mean(vis_samples)) if vis_samples else float("nan")

    return FrameBellReport(
        statistic=statistic,
        stderr=stderr,
        violates_lower=(statistic + 2.0 * stderr) < LOWER_BOUND,
        violates_upper=(statistic - 2.0 * stderr) > UPPER_BOUND,
        model_tag=BellModel.FOUR_TERM_TLS,
        visibility_used=visibility_used,
        n_frames=n_frames,
        n_realizations=n_realizations,
        m=m,
        achieved=achieved,
    )
