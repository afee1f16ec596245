"""Dense complex linear algebra over the truncated Fock space.

States are represented in the photon-number basis with a per-mode cutoff
``n_max`` (dimension ``d = n_max + 1``).  Two-mode objects use lexicographic
multi-index order: the flat index of ``|n1, n2>`` is ``n1 * d + n2``.

Truncated coherent-state vectors are deliberately *not* renormalized; the
weight lost to truncation is reported separately by :func:`truncation_weight`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CutoffMismatchError, DegenerateInputError

HERMITICITY_TOL = 1e-12


def log_factorials(n_max: int) -> np.ndarray:
    """Table of log(n!) for n = 0..n_max.

    All factorial ratios in this package go through this table; direct
    factorials overflow float64 beyond n ~ 170 and lose accuracy well before.
    """
    return np.array([math.lgamma(n + 1.0) for n in range(n_max + 1)])


def sqrt_factorials(n_max: int) -> np.ndarray:
    """Table of sqrt(n!) for n = 0..n_max (safe up to n ~ 170)."""
    return np.exp(0.5 * log_factorials(n_max))


@dataclass(frozen=True)
class FockCutoff:
    """Truncated Fock space: photon numbers 0..n_max on `modes` modes."""

    n_max: int
    modes: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 0:
            raise ValueError(f"n_max must be a nonnegative integer, got {self.n_max!r}")
        if self.modes not in (1, 2):
            raise ValueError(f"modes must be 1 or 2, got {self.modes!r}")

    @property
    def dim(self) -> int:
        """Dimension per mode."""
        return self.n_max + 1

    @property
    def total_dim(self) -> int:
        """Dimension of the full (possibly multi-mode) space."""
        return self.dim**self.modes


@dataclass(frozen=True)
class CoherentAmplitude:
    """One complex amplitude per mode."""

    values: tuple[complex, ...]

    def __init__(self, values: complex | Sequence[complex]):
        if isinstance(values, (complex, float, int)):
            values = (values,)
        vals = tuple(complex(v) for v in values)
        if len(vals) not in (1, 2):
            raise ValueError(f"expected 1 or 2 mode amplitudes, got {len(vals)}")
        for v in vals:
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"amplitude must be finite, got {v!r}")
        object.__setattr__(self, "values", vals)

    @property
    def modes(self) -> int:
        return len(self.values)

    def is_real_nonnegative(self) -> bool:
        return all(v.imag == 0.0 and v.real >= 0.0 for v in self.values)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian operator on the truncated Fock space.

    The stored matrix is exactly Hermitian: construction symmetrizes via
    (X + X^dag)/2 after checking the deviation is below `herm_tol`.  The trace
    is not required to be 1; heralded and process outputs are sub- or
    super-normalized.
    """

    cutoff: FockCutoff
    entries: np.ndarray = field(repr=False)

    def __init__(self, cutoff: FockCutoff, entries: np.ndarray, herm_tol: float = HERMITICITY_TOL):
        entries = np.asarray(entries, dtype=complex)
        dim = cutoff.total_dim
        if entries.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries.real)) or not np.all(np.isfinite(entries.imag)):
            raise ValueError("density matrix entries must be finite")
        dev = np.max(np.abs(entries - entries.conj().T))
        if dev > herm_tol:
            raise ValueError(f"matrix is not Hermitian: max deviation {dev:.3e} > {herm_tol:.1e}")
        sym = 0.5 * (entries + entries.conj().T)
        sym.flags.writeable = False
        object.__setattr__(self, "cutoff", cutoff)
        object.__setattr__(self, "entries", sym)

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)


def _mode_ket(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if alpha == 0:
        ket = np.zeros(n_max + 1, dtype=complex)
        ket[0] = 1.0
        return ket
    # exp(-|a|^2/2) a^n / sqrt(n!) in log form to stay finite at large n
    log_mag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * log_factorials(n_max)
    phase = np.exp(1j * n * math.atan2(alpha.imag, alpha.real))
    return np.exp(log_mag) * phase


def coherent_ket(alpha: CoherentAmplitude, cutoff: FockCutoff) -> np.ndarray:
    """Truncated coherent-state vector; not renormalized after truncation."""
    if alpha.modes != cutoff.modes:
        raise CutoffMismatchError(
            f"amplitude has {alpha.modes} mode(s) but cutoff has {cutoff.modes}"
        )
    ket = _mode_ket(alpha.values[0], cutoff.n_max)
    for v in alpha.values[1:]:
        ket = np.kron(ket, _mode_ket(v, cutoff.n_max))
    return ket


def coherent_density(alpha: CoherentAmplitude, cutoff: FockCutoff) -> DensityMatrix:
    """Projector |alpha><alpha| truncated to the cutoff (sub-normalized)."""
    ket = coherent_ket(alpha, cutoff)
    return DensityMatrix(cutoff, np.outer(ket, ket.conj()))


def truncation_weight(alpha: CoherentAmplitude, cutoff: FockCutoff) -> float:
    """Probability weight of |alpha> retained below the cutoff (product over modes)."""
    if alpha.modes != cutoff.modes:
        raise CutoffMismatchError(
            f"amplitude has {alpha.modes} mode(s) but cutoff has {cutoff.modes}"
        )
    weight = 1.0
    for v in alpha.values:
        lam = abs(v) ** 2
        if lam == 0.0:
            continue
        n = np.arange(cutoff.n_max + 1)
        terms = np.exp(-lam + n * math.log(lam) - log_factorials(cutoff.n_max))
        weight *= float(np.sum(terms))
    return min(weight, 1.0)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Trace norm ||a - b||_1 via Hermitian eigendecomposition."""
    if a.cutoff != b.cutoff:
        raise CutoffMismatchError(f"cutoff mismatch: {a.cutoff} vs {b.cutoff}")
    eigs = np.linalg.eigvalsh(a.entries - b.entries)
    return float(np.sum(np.abs(eigs)))


def _restrict_indices(big: FockCutoff, small_n_max: int) -> np.ndarray:
    """Flat indices of the sub-block with every mode index <= small_n_max."""
    keep = np.arange(small_n_max + 1)
    if big.modes == 1:
        return keep
    return (keep[:, None] * big.dim + keep[None, :]).ravel()


def project_cutoff(rho: DensityMatrix, smaller: FockCutoff) -> DensityMatrix:
    """Trace-normalized compression of `rho` onto the smaller cutoff."""
    big = rho.cutoff
    if smaller.modes != big.modes:
        raise CutoffMismatchError("projection cannot change the mode count")
    if smaller.n_max > big.n_max:
        raise CutoffMismatchError(
            f"target n_max {smaller.n_max} exceeds source n_max {big.n_max}"
        )
    idx = _restrict_indices(big, smaller.n_max)
    block = rho.entries[np.ix_(idx, idx)]
    tr = float(np.trace(block).real)
    if tr <= 0.0:
        raise DegenerateInputError("state has zero trace inside the target subspace")
    return DensityMatrix(smaller, block / tr)


def embed(rho: DensityMatrix, bigger: FockCutoff) -> DensityMatrix:
    """Zero-padded embedding of `rho` into a larger cutoff."""
    small = rho.cutoff
    if bigger.modes != small.modes:
        raise CutoffMismatchError("embedding cannot change the mode count")
    if bigger.n_max < small.n_max:
        raise CutoffMismatchError(
            f"target n_max {bigger.n_max} is smaller than source n_max {small.n_max}"
        )
    out = np.zeros((bigger.total_dim, bigger.total_dim), dtype=complex)
    idx = _restrict_indices(bigger, small.n_max)
    out[np.ix_(idx, idx)] = rho.entries
    return DensityMatrix(bigger, out)
