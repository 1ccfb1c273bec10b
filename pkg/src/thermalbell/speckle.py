"""Synthetic pseudothermal double-slit experiment.

Two slit sources, each modeled as a row of point sub-sources with i.i.d.
complex Gaussian amplitudes evolving in time as a stationary Gauss-Markov
process (autocorrelation exp(-dt/tau_c)).  A camera frame is the average of
the far-field intensity over ``substeps`` time steps spanning the integration
time, so the ratio tau_i/tau_c controls how much the speckle washes out
within one frame.  Frames are statistically independent realizations.

All rows of a frame carry the same field realization: the slit pair is taken
as fully coherent along y over the few-pixel window the correlator uses, so
the y-axis only provides the distinct detector pixels required by the
m-photon correlation scheme.

Reproducibility: every frame draws from its own counter-based Philox stream
keyed by (seed, frame index), so generation is chunk-size independent and
parallelizable across frames without changing output.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .errors import SamplingGuardError
from .sources import SourceKind, SourceModel

MIN_FRINGE_PIXELS = 16.0

# Philox counter blocks: frame streams for field generation start at 0,
# photonization uses a disjoint block so the same user seed never reuses a
# stream.
_PHOTONIZE_COUNTER_BASE = 1 << 63


@dataclass(frozen=True)
class Geometry:
    """Double-slit geometry and camera grid.

    The phase map uses the small-angle form delta(x) = k * d * x / z for the
    pixel-center abscissa x, with x = 0 at the grid center.
    """

    wavelength: float = 532e-9
    slit_separation: float = 200e-6
    slit_width: float = 25e-6
    propagation: float = 0.3
    pixel_pitch: float = 5.5e-6
    width: int = 512
    height: int = 8

    def __post_init__(self):
        for name in ("wavelength", "slit_separation", "slit_width",
                     "propagation", "pixel_pitch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.width < 2 or self.height < 1:
            raise ValueError("width must be >= 2 and height >= 1")

    @property
    def fringe_period(self) -> float:
        """Fringe period lambda * z / d in meters."""
        return self.wavelength * self.propagation / self.slit_separation

    @property
    def fringe_period_px(self) -> float:
        return self.fringe_period / self.pixel_pitch

    def pixel_positions(self) -> np.ndarray:
        """Pixel-center abscissae (meters), centered on the grid."""
        cols = np.arange(self.width, dtype=float)
        return (cols - (self.width - 1) / 2.0) * self.pixel_pitch

    def phase_map(self) -> np.ndarray:
        """Relative two-slit phase delta(x) per pixel column (radians)."""
        k = 2.0 * math.pi / self.wavelength
        return k * self.slit_separation * self.pixel_positions() / self.propagation

    def check_sampling(self, min_px: float = MIN_FRINGE_PIXELS) -> None:
        if self.fringe_period_px < min_px:
            raise SamplingGuardError(
                f"fringe period spans {self.fringe_period_px:.2f} px, "
                f"below the {min_px:.0f} px sampling guard")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Geometry":
        return cls(**data)


@dataclass
class FrameSet:
    """Stack of synthetic camera frames plus the metadata that generated it."""

    pixels: np.ndarray                 # [n_frames, height, width]
    geometry: Geometry | None
    seed: int
    tau_ratio: float
    substeps: int
    n_subsources: int

    @property
    def n_frames(self) -> int:
        return self.pixels.shape[0]

    def scaled(self, factor: float) -> "FrameSet":
        """Same frames with every intensity multiplied by ``factor``."""
        return FrameSet(self.pixels * factor, self.geometry, self.seed,
                        self.tau_ratio, self.substeps, self.n_subsources)


def subsource_positions(geom: Geometry, n_subsources: int, slits: int = 2) -> np.ndarray:
    """Transverse positions of all point sub-sources (meters).

    Sub-sources are equally spaced across each slit width; slit centers sit at
    +-d/2 (or at 0 for a single slit).
    """
    if n_subsources < 1:
        raise ValueError(f"n_subsources must be >= 1, got {n_subsources}")
    if slits not in (1, 2):
        raise ValueError(f"slits must be 1 or 2, got {slits}")
    if n_subsources == 1:
        offsets = np.zeros(1)
    else:
        offsets = np.linspace(-geom.slit_width / 2.0, geom.slit_width / 2.0, n_subsources)
    if slits == 1:
        centers = np.array([0.0])
    else:
        centers = np.array([-geom.slit_separation / 2.0, geom.slit_separation / 2.0])
    return (centers[:, None] + offsets[None, :]).ravel()


def _frame_rng(seed: int, counter: int) -> np.random.Generator:
    key = np.array([seed, counter], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _validate_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def iter_intensity_chunks(geom: Geometry, model: SourceModel, n_frames: int,
                          tau_ratio: float, substeps: int = 8,
                          n_subsources: int = 64, seed: int = 0,
                          slits: int = 2,
                          chunk: int = 4096) -> Iterator[np.ndarray]:
    """Yield frame-intensity chunks of shape [B, width] (float32).

    One row per frame; callers replicate along y as needed.  Output is
    independent of ``chunk``.
    """
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if tau_ratio < 0 or not math.isfinite(tau_ratio):
        raise ValueError(f"tau_ratio must be finite and >= 0, got {tau_ratio}")
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    if model.kind is not SourceKind.TLS:
        raise ValueError("frame synthesis models thermal slit pairs only; "
                         f"got source kind {model.kind.value}")
    seed = _validate_seed(seed)
    geom.check_sampling()

    positions = subsource_positions(geom, n_subsources, slits)
    n_src = positions.size
    k = 2.0 * math.pi / geom.wavelength
    # far-field propagation phases, [n_src, width]
    phases = np.exp(1j * k * np.outer(positions, geom.pixel_positions()) / geom.propagation)
    amp_sigma = math.sqrt(model.field_amp**2 * model.mean_photons / n_subsources)
    rho = math.exp(-tau_ratio / substeps)
    innov = math.sqrt(max(0.0, 1.0 - rho * rho))

    for start in range(0, n_frames, chunk):
        stop = min(start + chunk, n_frames)
        batch = stop - start
        draws = np.empty((batch, substeps, n_src), dtype=complex)
        for i, frame in enumerate(range(start, stop)):
            z = _frame_rng(seed, frame).standard_normal((substeps, n_src, 2))
            draws[i] = (z[..., 0] + 1j * z[..., 1]) * (amp_sigma / math.sqrt(2.0))
        current = draws[:, 0, :]
        field = current @ phases
        intensity = field.real**2 + field.imag**2
        for step in range(1, substeps):
            current = rho * current + innov * draws[:, step, :]
            field = current @ phases
            intensity += field.real**2 + field.imag**2
        intensity /= substeps
        yield intensity.astype(np.float32)


def generate_frames(geom: Geometry, model: SourceModel, n_frames: int,
                    tau_ratio: float, substeps: int = 8, n_subsources: int = 64,
                    seed: int = 0, slits: int = 2, chunk: int = 4096) -> FrameSet:
    """Generate a full in-memory frame stack [n_frames, height, width]."""
    out = np.empty((n_frames, geom.height, geom.width), dtype=np.float32)
    start = 0
    for block in iter_intensity_chunks(geom, model, n_frames, tau_ratio, substeps,
                                       n_subsources, seed, slits, chunk):
        out[start:start + block.shape[0]] = block[:, None, :]
        start += block.shape[0]
    return FrameSet(pixels=out, geometry=geom, seed=seed, tau_ratio=tau_ratio,
                    substeps=substeps, n_subsources=n_subsources)


def photonize(frames: FrameSet, gain: float, seed: int = 0) -> FrameSet:
    """Discrete-photon frames: per pixel, counts ~ Poisson(gain * intensity).

    Deterministic under ``seed``; uses a counter block disjoint from frame
    generation so identical seeds stay independent.
    """
    if gain <= 0:
        raise ValueError(f"gain must be > 0, got {gain}")
    seed = _validate_seed(seed)
    counts = np.empty(frames.pixels.shape, dtype=np.int32)
    rates = gain * np.asarray(frames.pixels, dtype=float)
    for f in range(frames.n_frames):
        rng = _frame_rng(seed, _PHOTONIZE_COUNTER_BASE + f)
        counts[f] = rng.poisson(rates[f])
    return FrameSet(pixels=counts, geometry=frames.geometry, seed=seed,
                    tau_ratio=frames.tau_ratio, substeps=frames.substeps,
                    n_subsources=frames.n_subsources)
