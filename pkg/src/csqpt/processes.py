"""Analytic process tensors, forward application, and probe-output synthesis.

A single-mode process is stored as the rank-4 array ``E[m, n, j, k]`` mapping
input matrix elements ``rho[m, n]`` to output elements ``out[j, k]``.  Two-mode
processes use the rank-8 analogue ``E[m1, m2, n1, n2, j1, j2, k1, k2]``.

The two-mode constructors (beam splitter, two-mode squeezer) exploit that a
unitary process factorizes as ``E = U[j, m] * conj(U[k, n])`` over flattened
multi-indices, so only the ``U`` matrix elements need closed-form evaluation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CutoffMismatchError, TruncationWarning
from .fock import (
    CoherentAmplitude,
    DensityMatrix,
    FockCutoff,
    coherent_density,
    log_factorials,
    truncation_weight,
)

SINGLE_MODE_KINDS = ("identity", "attenuation", "photon_add", "photon_sub", "cat")
TWO_MODE_KINDS = ("beam_splitter", "pdc")
PROCESS_KINDS = SINGLE_MODE_KINDS + TWO_MODE_KINDS

TWO_MODE_NMAX_CAP = 5  # rank-8 tensor at d=6 is ~27 MB; d=7 would blow past 64 MB


@dataclass(frozen=True)
class ProcessParams:
    """Tagged parameter set for one of the supported analytic processes."""

    kind: str
    eta: float | None = None
    theta: float | None = None
    r: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in PROCESS_KINDS:
            raise ValueError(f"unknown process kind {self.kind!r}")
        if self.kind == "attenuation":
            if self.eta is None or not (0.0 <= self.eta < 1.0):
                raise ValueError(f"attenuation requires eta in [0, 1), got {self.eta!r}")
        elif self.kind == "beam_splitter":
            if self.theta is None or not math.isfinite(self.theta):
                raise ValueError("beam_splitter requires a finite mixing angle theta")
        elif self.kind == "pdc":
            if self.r is None or not (math.isfinite(self.r) and self.r >= 0.0):
                raise ValueError(f"pdc requires squeezing r >= 0, got {self.r!r}")

    @classmethod
    def identity(cls) -> "ProcessParams":
        return cls("identity")

    @classmethod
    def attenuation(cls, eta: float) -> "ProcessParams":
        return cls("attenuation", eta=float(eta))

    @classmethod
    def photon_add(cls) -> "ProcessParams":
        return cls("photon_add")

    @classmethod
    def photon_sub(cls) -> "ProcessParams":
        return cls("photon_sub")

    @classmethod
    def cat(cls) -> "ProcessParams":
        return cls("cat")

    @classmethod
    def beam_splitter(cls, theta: float) -> "ProcessParams":
        return cls("beam_splitter", theta=float(theta))

    @classmethod
    def pdc(cls, r: float) -> "ProcessParams":
        return cls("pdc", r=float(r))

    @property
    def modes(self) -> int:
        return 2 if self.kind in TWO_MODE_KINDS else 1

    @property
    def transmissivity(self) -> float:
        """T = cos(theta/2) for the beam splitter."""
        if self.kind != "beam_splitter":
            raise ValueError("transmissivity is defined for beam_splitter only")
        return math.cos(self.theta / 2.0)

    @property
    def reflectivity(self) -> float:
        """R = sin(-theta/2) for the beam splitter."""
        if self.kind != "beam_splitter":
            raise ValueError("reflectivity is defined for beam_splitter only")
        return math.sin(-self.theta / 2.0)

    @property
    def label(self) -> str:
        if self.kind == "attenuation":
            return f"attenuation(eta={self.eta:g})"
        if self.kind == "beam_splitter":
            return f"beam_splitter(theta={self.theta:g})"
        if self.kind == "pdc":
            return f"pdc(r={self.r:g})"
        return self.kind


@dataclass(frozen=True)
class ProcessTensor:
    """Process superoperator in Fock coordinates (rank 4 or rank 8)."""

    cutoff: FockCutoff
    entries: np.ndarray = field(repr=False)
    label: str = ""

    def __init__(self, cutoff: FockCutoff, entries: np.ndarray, label: str = ""):
        entries = np.asarray(entries, dtype=complex)
        expected = (cutoff.dim,) * (4 * cutoff.modes)
        if entries.shape != expected:
            raise ValueError(f"expected tensor shape {expected}, got {entries.shape}")
        if not np.all(np.isfinite(entries.real)) or not np.all(np.isfinite(entries.imag)):
            raise ValueError("tensor entries must be finite")
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "cutoff", cutoff)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "label", label)


def hyp2f1_terminating(a: int, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric 2F1(a, b; c; z) for nonpositive integer a.

    The series terminates after |a| + 1 terms, so no convergence machinery is
    involved.  Raises on the pole case: c a nonpositive integer reached before
    the series terminates (a < c <= 0).
    """
    if a > 0 or a != int(a):
        raise ValueError(f"first parameter must be a nonpositive integer, got {a!r}")
    a = int(a)
    if c <= 0 and c == int(c) and c > a:
        raise ValueError(f"pole: c={c} is a nonpositive integer above a={a}")
    total = 1.0
    term = 1.0
    for n in range(-a):
        term *= (a + n) * (b + n) * z / ((c + n) * (n + 1))
        total += term
    return total


def _pochhammer(x: float, n: int) -> float:
    out = 1.0
    for i in range(n):
        out *= x + i
    return out


def _hyp2f1_regularized(a: int, b: float, c: int, z: float) -> float:
    """2F1(a, b; c; z) / Gamma(c) for nonpositive integer a and integer c.

    Entire in c; for c <= 0 the value follows from the standard limit
    identity, which again reduces to a terminating series.
    """
    if c >= 1:
        return hyp2f1_terminating(a, b, c, z) / math.factorial(c - 1)
    n = -c
    lead = _pochhammer(a, n + 1) * _pochhammer(b, n + 1) / math.factorial(n + 1)
    if lead == 0.0:
        return 0.0
    return lead * z ** (n + 1) * hyp2f1_terminating(a + n + 1, b + n + 1, n + 2, z)


def _identity_tensor(cutoff: FockCutoff) -> np.ndarray:
    d = cutoff.dim
    eye = np.eye(d)
    ten = np.einsum("mj,nk->mnjk", eye, eye).astype(complex)
    if cutoff.modes == 1:
        return ten
    eye2 = np.eye(d * d)
    ten = np.einsum("mj,nk->mnjk", eye2, eye2).astype(complex)
    return ten.reshape((d,) * 8)


def _attenuation_tensor(eta: float, cutoff: FockCutoff) -> np.ndarray:
    d = cutoff.dim
    lf = log_factorials(cutoff.n_max)
    # half log ratio per (upper, lower) index pair; pairing the exponent as
    # g[m,j] + g[n,k] keeps the tensor symmetry exact at the bit level
    g = 0.5 * (lf[:, None] - lf[None, :])
    loss = 1.0 - eta * eta
    ten = np.zeros((d, d, d, d), dtype=complex)
    for j in range(d):
        for k in range(d):
            for delta in range(min(d - j, d - k)):
                m, n = j + delta, k + delta
                val = math.exp((g[m, j] + g[n, k]) - lf[delta])
                ten[m, n, j, k] = val * eta ** (j + k) * loss**delta
    return ten


def _ladder_tensor(kind: str, cutoff: FockCutoff) -> np.ndarray:
    d = cutoff.dim
    ten = np.zeros((d, d, d, d), dtype=complex)
    if kind == "photon_sub":
        for j in range(d - 1):
            for k in range(d - 1):
                ten[j + 1, k + 1, j, k] = math.sqrt((j + 1) * (k + 1))
    else:  # photon_add
        for j in range(1, d):
            for k in range(1, d):
                ten[j - 1, k - 1, j, k] = math.sqrt(j * k)
    return ten


_QUARTER_PHASES = (1.0 + 0.0j, -1.0j, -1.0 + 0.0j, 1.0j)  # exp(-i*pi/2 * v) for v mod 4


def _cat_tensor(cutoff: FockCutoff) -> np.ndarray:
    d = cutoff.dim
    ten = np.zeros((d, d, d, d), dtype=complex)
    for j in range(d):
        for k in range(d):
            ten[j, k, j, k] = _QUARTER_PHASES[(j * j - k * k) % 4]
    return ten


def _beam_splitter_unitary(theta: float, cutoff: FockCutoff) -> np.ndarray:
    """Matrix elements <j1 j2|B|m1 m2> of the beam-splitter unitary.

    Closed form: the Table-1 quadruple sum factorizes into one such factor per
    upper/lower index pair; total photon number is conserved.
    """
    d = cutoff.dim
    t = math.cos(theta / 2.0)
    rr = math.sin(-theta / 2.0)
    lf = log_factorials(cutoff.n_max)
    u = np.zeros((d * d, d * d))
    for j1 in range(d):
        for j2 in range(d):
            for m1 in range(d):
                m2 = j1 + j2 - m1
                if not 0 <= m2 < d:
                    continue
                pref = math.exp(0.5 * (lf[m1] + lf[m2] - lf[j1] - lf[j2]))
                acc = 0.0
                for p in range(max(0, m1 - j2), min(j1, m1) + 1):
                    term = (
                        math.comb(j1, p)
                        * math.comb(j2, m1 - p)
                        * t ** (2 * p + j2 - m1)
                        * rr ** (j1 + m1 - 2 * p)
                    )
                    acc += -term if (j1 - p) % 2 else term
                u[j1 * d + j2, m1 * d + m2] = pref * acc
    return u


def _pdc_unitary(r: float, cutoff: FockCutoff) -> np.ndarray:
    """Matrix elements <j1 j2|S2(r)|m1 m2> of the two-mode squeezer.

    Terminating-hypergeometric closed form; the photon-number difference
    between the modes is conserved.  Entries with m1 < j1 come out of the
    regularized continuation (pair annihilation below the input level).
    """
    d = cutoff.dim
    th = math.tanh(r)
    ch = math.cosh(r)
    z = th * th
    lf = log_factorials(cutoff.n_max)
    u = np.zeros((d * d, d * d))
    for j1 in range(d):
        for j2 in range(d):
            diff = j2 - j1
            for m1 in range(d):
                m2 = m1 + diff
                if not 0 <= m2 < d:
                    continue
                pref = math.exp(0.5 * (lf[m1] + lf[m2] - lf[j1] - lf[j2]))
                hyp = _hyp2f1_regularized(-j1, m2 + 1, m1 - j1 + 1, z)
                u[j1 * d + j2, m1 * d + m2] = (
                    pref * th ** (m1 - j1) * ch ** (-(diff + 1)) * hyp
                )
    return u


def _tensor_from_unitary(u: np.ndarray, cutoff: FockCutoff) -> np.ndarray:
    ten = np.einsum("jm,kn->mnjk", u.astype(complex), u.conj().astype(complex))
    return ten.reshape((cutoff.dim,) * 8)


def analytic_tensor(params: ProcessParams, cutoff: FockCutoff) -> ProcessTensor:
    """Closed-form process tensor restricted to all indices <= n_max."""
    if params.modes != cutoff.modes:
        raise CutoffMismatchError(
            f"{params.kind} acts on {params.modes} mode(s) but cutoff has {cutoff.modes}"
        )
    if cutoff.modes == 2 and cutoff.n_max > TWO_MODE_NMAX_CAP:
        raise ValueError(
            f"two-mode tensors are capped at n_max={TWO_MODE_NMAX_CAP} to bound memory"
        )
    if params.kind == "identity":
        entries = _identity_tensor(cutoff)
    elif params.kind == "attenuation":
        entries = _attenuation_tensor(params.eta, cutoff)
    elif params.kind in ("photon_add", "photon_sub"):
        entries = _ladder_tensor(params.kind, cutoff)
    elif params.kind == "cat":
        entries = _cat_tensor(cutoff)
    elif params.kind == "beam_splitter":
        entries = _tensor_from_unitary(_beam_splitter_unitary(params.theta, cutoff), cutoff)
    else:  # pdc
        if params.r == 0.0:
            entries = _identity_tensor(cutoff)
        else:
            entries = _tensor_from_unitary(_pdc_unitary(params.r, cutoff), cutoff)
    return ProcessTensor(cutoff, entries, label=params.label)


def apply(tensor: ProcessTensor, rho: DensityMatrix) -> DensityMatrix:
    """Contract the tensor with input matrix elements: out_jk = sum E^mn_jk rho_mn."""
    if tensor.cutoff != rho.cutoff:
        raise CutoffMismatchError(
            f"tensor cutoff {tensor.cutoff} does not match state cutoff {rho.cutoff}"
        )
    d = tensor.cutoff.dim
    if tensor.cutoff.modes == 1:
        out = np.einsum("mnjk,mn->jk", tensor.entries, rho.entries)
    else:
        rho4 = rho.entries.reshape(d, d, d, d)
        out = np.einsum("abcdefgh,abcd->efgh", tensor.entries, rho4).reshape(d * d, d * d)
    # estimated tensors satisfy the symmetry invariant only to ~1e-8
    return DensityMatrix(tensor.cutoff, out, herm_tol=1e-6)


def synthesize_probe_output(tensor: ProcessTensor, alpha: CoherentAmplitude) -> DensityMatrix:
    """Process output on the truncated probe |alpha><alpha|.

    Identical to ``apply(tensor, coherent_density(alpha))``: the power-series
    synthesis over within-cutoff indices *is* that finite contraction.
    """
    weight = truncation_weight(alpha, tensor.cutoff)
    if weight < 0.99:
        warnings.warn(
            f"probe amplitude {alpha.values} keeps only {weight:.4f} of its weight "
            f"below n_max={tensor.cutoff.n_max}",
            TruncationWarning,
            stacklevel=2,
        )
    return apply(tensor, coherent_density(alpha, tensor.cutoff))


def choi_matrix(tensor: ProcessTensor) -> np.ndarray:
    """Choi matrix J[(j,m),(k,n)] = E^mn_jk; Hermitian by the tensor symmetry."""
    d = tensor.cutoff.dim
    if tensor.cutoff.modes == 1:
        return tensor.entries.transpose(2, 0, 3, 1).reshape(d * d, d * d)
    big = d * d * d * d
    return tensor.entries.transpose(4, 5, 0, 1, 6, 7, 2, 3).reshape(big, big)


def choi_min_eigenvalue(tensor: ProcessTensor) -> float:
    """Smallest Choi eigenvalue; >= 0 (up to rounding) iff the map is CP."""
    j = choi_matrix(tensor)
    return float(np.linalg.eigvalsh(0.5 * (j + j.conj().T))[0])


def symmetry_deviation(tensor: ProcessTensor) -> float:
    """Max violation of E^nm_kj = conj(E^mn_jk)."""
    e = tensor.entries
    if tensor.cutoff.modes == 1:
        swapped = e.transpose(1, 0, 3, 2)
    else:
        swapped = e.transpose(2, 3, 0, 1, 6, 7, 4, 5)
    return float(np.max(np.abs(e - swapped.conj())))


def trace_rule_deviation(tensor: ProcessTensor) -> np.ndarray:
    """sum_j E^mn_jj - delta_mn, indexed by the input indices.

    Zero (within tolerance) exactly where the truncated process is
    trace-preserving; photon-creating processes violate it near the cutoff.
    """
    d = tensor.cutoff.dim
    if tensor.cutoff.modes == 1:
        sums = np.einsum("mnjj->mn", tensor.entries)
        return sums - np.eye(d)
    sums = np.einsum("mnabjkjk->mnab", tensor.entries.reshape((d,) * 8))
    delta = np.einsum("ma,nb->mnab", np.eye(d), np.eye(d))
    return sums - delta


def parity_rule_deviation(tensor: ProcessTensor) -> float:
    """Max |E^mn_jk| over entries with m - j != n - k (single mode only)."""
    if tensor.cutoff.modes != 1:
        raise ValueError("parity rule check applies to single-mode tensors")
    d = tensor.cutoff.dim
    m, n, j, k = np.ogrid[:d, :d, :d, :d]
    off_rule = (m - j) != (n - k)
    if not off_rule.any():
        return 0.0
    return float(np.max(np.abs(tensor.entries[np.broadcast_to(off_rule, tensor.entries.shape)])))
