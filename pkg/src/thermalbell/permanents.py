"""Independent oracle for thermal correlation formulas via matrix permanents.

For Gaussian (thermal) light the normally ordered (m+1)-th order correlation
equals the permanent of the first-order coherence matrix built over the
detector positions, with repeated positions entered as repeated rows/columns.
This route shares no code with the closed forms in :mod:`thermalbell.analytic`
and is used to cross-check them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import PermanentSizeError
from .sources import SourceKind, SourceModel

# Ryser's formula costs O(2^n * n); size 16 stays tolerable (~0.5 s), anything
# larger is refused.
MAX_PERMANENT_SIZE = 16


@dataclass
class CoherenceMatrix:
    """First-order coherence matrix J[p, q] = <E-(r_p) E+(r_q)>."""

    entries: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]


class PermanentCorrelation(NamedTuple):
    raw: float          # perm(J), the unnormalized correlation value
    normalized: float   # perm(J) / prod_p J[p, p]


def coherence_matrix(deltas: Sequence[float], model: SourceModel) -> CoherenceMatrix:
    """Coherence matrix of two independent thermal point sources.

    J[p, q] = E0^2 * <n> * (1 + exp(i (delta_q - delta_p))); the diagonal is
    the constant first-order correlation 2 E0^2 <n>.
    """
    if model.kind is not SourceKind.TLS:
        raise ValueError(f"coherence matrix requires a thermal model, got {model.kind.value}")
    d = np.asarray(deltas, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("deltas must be a nonempty 1-d sequence of phases")
    u = model.field_amp**2 * model.mean_photons
    J = u * (1.0 + np.exp(1j * (d[None, :] - d[:, None])))
    return CoherenceMatrix(entries=J)


def permanent(matrix: np.ndarray) -> complex:
    """Permanent of a square matrix by Ryser's formula with Gray-code updates.

    Exact up to floating-point accumulation; complexity O(2^n * n), guarded
    at n <= 16.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n > MAX_PERMANENT_SIZE:
        raise PermanentSizeError(
            f"permanent of size {n} exceeds the supported maximum {MAX_PERMANENT_SIZE}")

    a = a.astype(complex)
    row_sums = np.zeros(n, dtype=complex)
    total = 0.0 + 0.0j
    prev_gray = 0
    for g in range(1, 1 << n):
        gray = g ^ (g >> 1)
        changed = gray ^ prev_gray
        j = changed.bit_length() - 1
        if gray & changed:
            row_sums += a[:, j]
        else:
            row_sums -= a[:, j]
        prev_gray = gray
        sign = -1.0 if (gray.bit_count() & 1) else 1.0
        total += sign * np.prod(row_sums)
    if n & 1:
        total = -total
    return complex(total)


def gm1_from_permanent(m: int, delta1: float, delta2: float,
                       model: SourceModel) -> PermanentCorrelation:
    """(m+1)-th order thermal correlation as a coherence-matrix permanent.

    The matrix is built over delta1 repeated m times plus delta2 once (literal
    row repetition; no multiplicity shortcuts).  The raw value must equal the
    closed-form correlation set; the normalized value divides by the product
    of diagonal entries, i.e. by g1^(m+1).
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if m + 1 > MAX_PERMANENT_SIZE:
        raise PermanentSizeError(
            f"order {m + 1} exceeds the supported permanent size {MAX_PERMANENT_SIZE}")
    J = coherence_matrix([delta1] * m + [delta2], model).entries
    p = permanent(J)
    diag_prod = float(np.prod(np.real(np.diag(J))))
    scale = abs(p) if abs(p) > 0 else 1.0
    if abs(p.imag) > 1e-9 * scale:
        raise ArithmeticError(f"permanent of a Hermitian PSD matrix came out complex: {p}")
    return PermanentCorrelation(raw=p.real, normalized=p.real / diag_prod)
