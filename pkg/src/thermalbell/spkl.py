"""SPKL binary frame-stack format.

Layout (all little-endian):
    magic   4 bytes  b"SPKL"
    version u32      (= 1)
    n_frames u32
    height  u32
    width   u32
    tau_ratio f64
    seed    u64
    data    n_frames * height * width float32, row-major, frame-major

A JSON sidecar at ``<path>.meta.json`` carries everything the header cannot
(geometry, model, substeps, run provenance).  The .spkl payload is
deterministic under a fixed config and seed; timestamps live only in the
sidecar.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .speckle import FrameSet, Geometry

MAGIC = b"SPKL"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIdQ")


class SpklFormatError(OSError):
    """File is not a readable SPKL stack."""


@dataclass(frozen=True)
class SpklHeader:
    n_frames: int
    height: int
    width: int
    tau_ratio: float
    seed: int

    @property
    def frame_bytes(self) -> int:
        return self.height * self.width * 4


def _pack_header(header: SpklHeader) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, header.n_frames, header.height,
                        header.width, header.tau_ratio, header.seed)


def read_header(path: str | Path) -> SpklHeader:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise SpklFormatError(f"{path}: file shorter than the SPKL header")
    magic, version, n_frames, height, width, tau_ratio, seed = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise SpklFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SpklFormatError(f"{path}: unsupported SPKL version {version}")
    return SpklHeader(n_frames, height, width, tau_ratio, seed)


class SpklWriter:
    """Streaming writer; frame count is fixed up front and enforced on close."""

    def __init__(self, path: str | Path, n_frames: int, height: int, width: int,
                 tau_ratio: float, seed: int):
        self.path = Path(path)
        self.header = SpklHeader(n_frames, height, width, tau_ratio, seed)
        self._fh = open(self.path, "wb")
        self._fh.write(_pack_header(self.header))
        self._written = 0

    def write(self, frames: np.ndarray) -> None:
        frames = np.asarray(frames)
        if frames.ndim != 3 or frames.shape[1:] != (self.header.height, self.header.width):
            raise ValueError(f"chunk shape {frames.shape} does not match header "
                             f"(h={self.header.height}, w={self.header.width})")
        self._fh.write(np.ascontiguousarray(frames, dtype="<f4").tobytes())
        self._written += frames.shape[0]

    def close(self) -> None:
        self._fh.close()
        if self._written != self.header.n_frames:
            raise SpklFormatError(
                f"{self.path}: wrote {self._written} frames, header promised "
                f"{self.header.n_frames}")

    def __enter__(self) -> "SpklWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self._fh.close()


def write_spkl(path: str | Path, frames: FrameSet) -> None:
    n, h, w = frames.pixels.shape
    with SpklWriter(path, n, h, w, frames.tau_ratio, frames.seed) as writer:
        writer.write(frames.pixels)


def read_spkl(path: str | Path, mmap: bool = False) -> tuple[SpklHeader, np.ndarray]:
    header = read_header(path)
    expected = header.n_frames * header.frame_bytes
    actual = Path(path).stat().st_size - _HEADER.size
    if actual != expected:
        raise SpklFormatError(
            f"{path}: payload is {actual} bytes, header implies {expected}")
    shape = (header.n_frames, header.height, header.width)
    if mmap:
        data = np.memmap(path, dtype="<f4", mode="r", offset=_HEADER.size, shape=shape)
    else:
        data = np.fromfile(path, dtype="<f4", offset=_HEADER.size).reshape(shape)
    return header, data


def iter_spkl(path: str | Path, chunk: int = 4096) -> Iterator[np.ndarray]:
    """Yield frame chunks [B, height, width] sequentially from disk."""
    header = read_header(path)
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        remaining = header.n_frames
        while remaining > 0:
            batch = min(chunk, remaining)
            raw = fh.read(batch * header.frame_bytes)
            if len(raw) != batch * header.frame_bytes:
                raise SpklFormatError(f"{path}: truncated frame payload")
            yield np.frombuffer(raw, dtype="<f4").reshape(
                batch, header.height, header.width)
            remaining -= batch


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".meta.json")


def write_sidecar(path: str | Path, payload: dict) -> None:
    sidecar_path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_sidecar(path: str | Path) -> dict:
    return json.loads(sidecar_path(path).read_text())


def load_frameset(path: str | Path, mmap: bool = False) -> FrameSet:
    """Read an SPKL stack plus its sidecar back into a FrameSet.

    Geometry and generation details come from the sidecar when present;
    otherwise they are left unset.
    """
    header, pixels = read_spkl(path, mmap=mmap)
    geometry = None
    substeps = 0
    n_subsources = 0
    try:
        meta = read_sidecar(path)
    except FileNotFoundError:
        meta = {}
    if "geometry" in meta:
        geometry = Geometry.from_dict(meta["geometry"])
    substeps = int(meta.get("substeps", 0))
    n_subsources = int(meta.get("n_subsources", 0))
    return FrameSet(pixels=pixels, geometry=geometry, seed=header.seed,
                    tau_ratio=header.tau_ratio, substeps=substeps,
                    n_subsources=n_subsources)
