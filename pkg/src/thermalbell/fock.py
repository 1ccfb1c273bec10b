"""Exact two-mode Fock-space computations at small truncation.

Thermal and single-photon-pair states, the m-photon detection projection
(each detection applies the positive-frequency field operator, i.e. a
phase-weighted photon subtraction), normally ordered correlation
expectations, and the cross-correlation coefficient between the two source
modes after m detections.

Basis ordering: |n1, n2> maps to index n1 * dim + n2, with n1, n2 < dim.
Density matrices are stored dense; operators are kept sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import UnderTruncationError, ZeroProjectionError

# Tolerances for state health checks.
HERMITICITY_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_DEFICIT_TOL = 1e-8
TAIL_TOL = 1e-10


@dataclass
class TwoModeState:
    """Truncated two-mode density matrix.

    ``trace_deficit`` records the probability mass lost to truncation: for
    constructed states the geometric tail beyond the cutoff, for projected
    states the occupancy of the highest Fock shell (an estimate of how much
    the projection pushed against the cutoff).
    """

    dim: int
    matrix: np.ndarray
    trace_deficit: float = 0.0

    @property
    def under_truncated(self) -> bool:
        return self.trace_deficit > TAIL_TOL

    def validate(self) -> None:
        """Check Hermiticity, positive semidefiniteness, and unit trace."""
        rho = self.matrix
        if not np.allclose(rho, rho.conj().T, atol=HERMITICITY_TOL, rtol=0.0):
            raise ValueError("density matrix is not Hermitian")
        eigs = np.linalg.eigvalsh(rho)
        if eigs.min() < -PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {eigs.min()}")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace is {np.trace(rho).real}, not 1")

    def occupation(self, mode: int) -> float:
        """Mean photon number <a_mode^dag a_mode>."""
        nvec = _number_diagonal(self.dim, mode)
        return float(np.real(np.sum(nvec * np.diag(self.matrix))))


def _destroy(dim: int) -> sparse.csr_matrix:
    return sparse.diags(np.sqrt(np.arange(1, dim)), 1, format="csr")


def _mode_op(dim: int, op: sparse.spmatrix, mode: int) -> sparse.csr_matrix:
    eye = sparse.identity(dim, format="csr")
    if mode == 0:
        return sparse.kron(op, eye, format="csr")
    return sparse.kron(eye, op, format="csr")


def _number_diagonal(dim: int, mode: int) -> np.ndarray:
    n = np.arange(dim, dtype=float)
    if mode == 0:
        return np.repeat(n, dim)
    return np.tile(n, dim)


def field_op(dim: int, delta: float, scale: float = 1.0) -> sparse.csr_matrix:
    """Positive-frequency field operator E+(delta) = scale * (a1 + e^{i delta} a2)."""
    a = _destroy(dim)
    return (scale * (_mode_op(dim, a, 0) + np.exp(1j * delta) * _mode_op(dim, a, 1))).tocsr()


def thermal_state(mean_photons: float, dim: int) -> TwoModeState:
    """Product of two single-mode thermal states with equal mean photon number.

    Per-mode weights p(n) are geometric with ratio nbar/(1+nbar); the state is
    renormalized after truncation and rejected when the lost tail mass exceeds
    the tolerance.
    """
    if mean_photons <= 0:
        raise ValueError(f"mean_photons must be > 0, got {mean_photons}")
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    q = mean_photons / (1.0 + mean_photons)
    weights = (q ** np.arange(dim)) / (1.0 + mean_photons)
    per_mode_mass = float(weights.sum())
    deficit = 1.0 - per_mode_mass**2
    if deficit > TRACE_DEFICIT_TOL:
        suggested = suggest_dim(mean_photons, 0)
        raise UnderTruncationError(
            f"thermal state at nbar={mean_photons} loses {deficit:.3e} trace mass "
            f"at dim={dim}; use dim >= {suggested}", suggested_dim=suggested)
    diag = np.kron(weights, weights)
    diag /= diag.sum()
    return TwoModeState(dim=dim, matrix=np.diag(diag.astype(complex)), trace_deficit=deficit)


def spe_state(dim: int = 2) -> TwoModeState:
    """Pure |1, 1> state of two single-photon emitters."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    rho = np.zeros((dim * dim, dim * dim), dtype=complex)
    idx = 1 * dim + 1
    rho[idx, idx] = 1.0
    return TwoModeState(dim=dim, matrix=rho, trace_deficit=0.0)


def _top_shell_mass(dim: int, rho: np.ndarray) -> float:
    pops = np.real(np.diag(rho)).reshape(dim, dim)
    return float(pops[-1, :].sum() + pops[:, -1].sum() - pops[-1, -1])


def project_m(state: TwoModeState, delta1: float, m: int,
              field_amp: float = 1.0) -> TwoModeState:
    """State after m photon detections at phase delta1.

    rho(m) = E+(delta1)^m rho E-(delta1)^m / trace.  Raises on vanishing
    detection probability; flags under-truncation through ``trace_deficit``
    when the projected state piles up near the cutoff.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    ep = field_op(state.dim, delta1, field_amp)
    epm = ep
    for _ in range(m - 1):
        epm = (epm @ ep).tocsr()
    # E^m rho (E^m)^dag with rho Hermitian: (E^m (E^m rho)^dag)^dag
    b = epm @ state.matrix
    rho = (epm @ b.conj().T).conj().T
    norm = float(np.trace(rho).real)
    if norm < 1e-300:
        raise ZeroProjectionError(
            f"projection of {m} detections has vanishing probability (trace {norm})")
    rho = rho / norm
    rho = 0.5 * (rho + rho.conj().T)
    return TwoModeState(dim=state.dim, matrix=rho,
                        trace_deficit=_top_shell_mass(state.dim, rho))


def cross_corr(state: TwoModeState) -> complex:
    """Cross-correlation coefficient <a1^dag a2> / sqrt(<n1> <n2>) between the
    two source modes.

    Also asserts that the first moments <a1>, <a2> vanish, as they must for
    phase-symmetric states of independent sources.
    """
    dim = state.dim
    a = _destroy(dim)
    a1 = _mode_op(dim, a, 0)
    a2 = _mode_op(dim, a, 1)
    rho = state.matrix

    def expect(op: sparse.spmatrix) -> complex:
        return complex((op @ rho).trace())

    for label, op in (("a1", a1), ("a2", a2)):
        moment = expect(op)
        if abs(moment) > 1e-12:
            raise ValueError(f"first moment <{label}> = {moment} does not vanish")

    n1 = state.occupation(0)
    n2 = state.occupation(1)
    if min(n1, n2) < 1e-300:
        raise ZeroDivisionError("source-mode occupation vanishes; coefficient undefined")
    return expect((a1.conj().T @ a2).tocsr()) / math.sqrt(n1 * n2)


def expect_gm1(state: TwoModeState, m: int, delta1: float, delta2: float,
               field_amp: float = 1.0) -> float:
    """Normally ordered correlation <E-(d1)^m E-(d2) E+(d2) E+(d1)^m>.

    m = 0 reduces to the first-order correlation at delta2.
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    op = field_op(state.dim, delta2, field_amp)
    e1 = field_op(state.dim, delta1, field_amp)
    for _ in range(m):
        op = (op @ e1).tocsr()
    b = op @ state.matrix
    value = complex(np.vdot(op.toarray(), b))
    scale = max(abs(value), 1.0)
    if abs(value.imag) > 1e-9 * scale:
        raise ArithmeticError(f"correlation expectation came out complex: {value}")
    return value.real


def suggest_dim(mean_photons: float, m: int, tol: float = TAIL_TOL,
                margin: int = 4) -> int:
    """Smallest per-mode cutoff keeping the m-detection-weighted geometric
    tail below ``tol``.

    After m detections the relevant per-mode weights scale like
    binom(n+m, m) * q^n; the first cutoff whose remaining tail (geometric
    bound) is below tol is returned, plus a safety margin.
    """
    q = mean_photons / (1.0 + mean_photons)
    log_q = math.log(q)
    total = 0.0
    terms = []
    for n in range(2000):
        log_w = math.lgamma(n + m + 1) - math.lgamma(n + 1) - math.lgamma(m + 1) + n * log_q
        w = math.exp(log_w)
        terms.append(w)
        total += w
        if n > m + 2 and w / total < tol * (1.0 - q) / 10.0:
            break
    total = math.fsum(terms)
    acc = 0.0
    for n, w in enumerate(terms):
        acc += w
        if 1.0 - acc / total < tol:
            return n + 1 + margin
    return len(terms) + margin  # pragma: no cover


def cm_coefficient(mean_photons: float, m: int, delta1: float,
                   dim: int | None = None, field_amp: float = 1.0) -> complex:
    """Cross-correlation coefficient after m detections on a thermal pair.

    Convenience pipeline thermal_state -> project_m -> cross_corr with
    automatic cutoff selection; if the post-projection tail check trips, the
    cutoff is raised once and the computation re-run before giving up.
    """
    chosen = dim if dim is not None else suggest_dim(mean_photons, m)
    for attempt in range(2):
        state = thermal_state(mean_photons, chosen)
        projected = project_m(state, delta1, m, field_amp)
        if not projected.under_truncated:
            return cross_corr(projected)
        if attempt == 0:
            chosen += 8
    raise UnderTruncationError(
        f"projected state remains under-truncated at dim={chosen}", suggested_dim=chosen + 8)
