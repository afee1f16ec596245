"""Process-tensor estimation from coherent-probe records.

Both estimators realize derivative evaluation at zero amplitude as
coefficient extraction from a linear least-squares fit: the matrix elements of
the probe outputs, premultiplied by the Gaussian envelope exp(+|alpha|^2), are
polynomials in the probe amplitude whose Taylor coefficients *are* the tensor
entries (up to factorial weights).  The fits therefore use the model

    element(alpha) = exp(-|alpha|^2) * polynomial(alpha, conj(alpha))

which keeps residuals in the units of the measured data and is exact for any
within-cutoff synthesis.

Phase-invariant processes need only real probe amplitudes: each (j, k) output
element is an even or odd function of r (parity of j - k), which the fit
enforces structurally, and the selection rule m - j = n - k zeroes every
off-rule tensor entry exactly.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CutoffMismatchError, IllConditionedWarning, UnderdeterminedError
from .fock import (
    CoherentAmplitude,
    DensityMatrix,
    FockCutoff,
    log_factorials,
    truncation_weight,
)
from .processes import ProcessTensor

CONDITION_WARN_THRESHOLD = 1e12
TRUNCATION_FLAG_THRESHOLD = 0.99
TWO_MODE_ESTIMATION_NMAX_CAP = 3


@dataclass(frozen=True)
class ProbeRecord:
    """One probe amplitude with its reconstructed (unit-trace) output state.

    `herald_probability` carries the trace of the raw process output.  It can
    exceed 1 for trace-increasing processes such as photon addition, so only
    nonnegativity is enforced.
    """

    amplitude: CoherentAmplitude
    output: DensityMatrix
    herald_probability: float | None = None

    def __post_init__(self) -> None:
        if self.amplitude.modes != self.output.cutoff.modes:
            raise CutoffMismatchError("amplitude and output mode counts differ")
        if abs(self.output.trace - 1.0) > 1e-6:
            raise ValueError(
                f"record output must have unit trace, got {self.output.trace!r}"
            )
        if self.herald_probability is not None:
            p = float(self.herald_probability)
            if not math.isfinite(p) or p < 0.0:
                raise ValueError(f"herald probability must be finite and >= 0, got {p!r}")
            object.__setattr__(self, "herald_probability", p)


@dataclass(frozen=True)
class PolyFit:
    """Parity-constrained radial fit for one (j, k) output element.

    `coeffs[l]` multiplies r**l in the polynomial factor of the model
    exp(-r^2) * sum_l coeffs[l] r**l; off-parity entries are structurally zero.
    """

    jk: tuple[int, int]
    parity: str  # "even" or "odd"
    degree: int
    coeffs: np.ndarray = field(repr=False)
    residual_rms: float
    condition_number: float
    leverage: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MonomialFit:
    """Bivariate (or 4-variable) monomial fit for one output index pair."""

    jk: tuple
    degree: int
    coeffs: np.ndarray = field(repr=False)
    residual_rms: float
    condition_number: float
    leverage: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class FitReport:
    residual_rms: float
    condition_number: float
    leverage: np.ndarray
    n_points: int


@dataclass(frozen=True)
class EstimationResult:
    """Estimated tensor plus per-element fit diagnostics."""

    tensor: ProcessTensor
    fits: dict
    condition_number: float
    flagged_amplitudes: tuple[CoherentAmplitude, ...] = ()

    @property
    def ill_conditioned(self) -> bool:
        return self.condition_number > CONDITION_WARN_THRESHOLD


def fit_diagnostics(fit: PolyFit | MonomialFit) -> FitReport:
    """Residual RMS, design condition number, and per-point leverage."""
    return FitReport(
        residual_rms=float(fit.residual_rms),
        condition_number=float(fit.condition_number),
        leverage=np.asarray(fit.leverage, dtype=float),
        n_points=len(fit.leverage),
    )


def recommended_radius_max(n_max: int) -> float:
    """Probe radius sqrt(N): the Poisson mean |alpha|^2 then reaches the cutoff.

    Heuristic; the estimation is exact for within-cutoff data at any radius,
    but smaller ranges degrade conditioning and larger ones truncation weight.
    """
    return math.sqrt(n_max)


def rescale_heralded(record: ProbeRecord) -> DensityMatrix:
    """Undo the unit-trace normalization: output times herald probability."""
    if record.herald_probability is None:
        return record.output
    return DensityMatrix(
        record.output.cutoff, record.output.entries * record.herald_probability
    )


def _validate_records(records: list[ProbeRecord], cutoff: FockCutoff) -> None:
    if not records:
        raise UnderdeterminedError("no probe records supplied")
    for rec in records:
        if rec.output.cutoff != cutoff:
            raise CutoffMismatchError(
                f"record cutoff {rec.output.cutoff} does not match {cutoff}"
            )
    with_herald = sum(rec.herald_probability is not None for rec in records)
    if with_herald not in (0, len(records)):
        raise ValueError(
            "herald_probability must be present on all records or none "
            f"(found {with_herald} of {len(records)})"
        )


def _merge_duplicates(
    keys: list, matrices: list[np.ndarray]
) -> tuple[list, np.ndarray]:
    """Average outputs sharing a probe amplitude (weight = record count)."""
    groups: dict = {}
    for key, mat in zip(keys, matrices):
        groups.setdefault(key, []).append(mat)
    merged_keys = sorted(groups.keys(), key=lambda k: np.atleast_1d(np.asarray(k)).view(float).tolist())
    stacked = np.stack([np.mean(groups[k], axis=0) for k in merged_keys])
    return merged_keys, stacked


def _solve_design(
    design: np.ndarray, rhs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """Column-scaled QR least squares; returns (coeffs, residual_rms, cond, leverage)."""
    rows, cols = design.shape
    if rows < cols:
        raise UnderdeterminedError(
            f"{rows} probe rows cannot determine {cols} coefficients"
        )
    scale = np.linalg.norm(design, axis=0)
    scale[scale == 0.0] = 1.0
    scaled = design / scale
    sing = np.linalg.svd(scaled, compute_uv=False)
    if sing[-1] <= sing[0] * 1e-13:
        raise UnderdeterminedError(
            "design matrix is rank deficient: probe amplitudes are not in general position"
        )
    cond = float(sing[0] / sing[-1])
    q, r = np.linalg.qr(scaled)
    coeffs = np.linalg.solve(r, q.conj().T @ rhs) / scale[:, None]
    resid = rhs - design @ coeffs
    residual_rms = np.sqrt(np.mean(np.abs(resid) ** 2, axis=0))
    leverage = np.sum(np.abs(q) ** 2, axis=1)
    return coeffs, residual_rms, cond, leverage


def _gather_columns(
    matrices: np.ndarray, fibers: list, threads: int
) -> np.ndarray:
    """Stack per-record matrix elements into fiber columns.

    Reading the (immutable) record outputs is safe concurrently; results land
    in preallocated slots, so the chunking never affects the values.
    """
    out = np.empty((matrices.shape[0], len(fibers)), dtype=complex)

    def fill(span: range) -> None:
        for idx in span:
            out[:, idx] = matrices[(slice(None),) + fibers[idx]]

    if threads <= 1 or len(fibers) < 2:
        fill(range(len(fibers)))
    else:
        chunk = -(-len(fibers) // threads)
        spans = [range(s, min(s + chunk, len(fibers))) for s in range(0, len(fibers), chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, spans))
    return out


def _warn_if_ill_conditioned(cond: float, context: str) -> None:
    if cond > CONDITION_WARN_THRESHOLD:
        warnings.warn(
            f"{context}: design condition number {cond:.3e} exceeds "
            f"{CONDITION_WARN_THRESHOLD:.0e}; coefficients may be unreliable",
            IllConditionedWarning,
            stacklevel=3,
        )


def estimate_phase_invariant(
    records: list[ProbeRecord], cutoff: FockCutoff, threads: int = 1
) -> EstimationResult:
    """Estimate a phase-invariant single-mode tensor from real-amplitude probes.

    Per (j, k): rescale heralded outputs, mirror the data to negative radii
    with sign (-1)**(j-k), fit the parity-matching polynomial of degree 2N
    under the Gaussian envelope, and place sqrt(m! n!) times the (m+n)-th
    coefficient at every entry allowed by the selection rule m - j = n - k.
    """
    if cutoff.modes != 1:
        raise CutoffMismatchError("phase-invariant estimation is single-mode only")
    _validate_records(records, cutoff)
    for rec in records:
        if not rec.amplitude.is_real_nonnegative():
            raise ValueError(
                f"phase-invariant probes must have real nonnegative amplitudes, "
                f"got {rec.amplitude.values[0]!r}"
            )

    n_max, d = cutoff.n_max, cutoff.dim
    radii = [rec.amplitude.values[0].real for rec in records]
    rescaled = [rescale_heralded(rec).entries for rec in records]
    merged_radii, outputs = _merge_duplicates(radii, rescaled)
    r_pos = np.asarray(merged_radii)

    n_positive = int(np.sum(r_pos > 0.0))
    degree = 2 * n_max
    unknowns = {"even": n_max + 1, "odd": n_max}
    if len(merged_radii) < unknowns["even"]:
        raise UnderdeterminedError(
            f"{len(merged_radii)} distinct radii cannot determine "
            f"{unknowns['even']} even-parity coefficients (need >= N+1)"
        )
    if unknowns["odd"] > 0 and n_positive < unknowns["odd"]:
        raise UnderdeterminedError(
            f"{n_positive} distinct positive radii cannot determine "
            f"{unknowns['odd']} odd-parity coefficients"
        )

    # mirrored data: rows at -r for every r > 0, sign handled per parity below
    mirror = r_pos[r_pos > 0.0]
    r_all = np.concatenate([r_pos, -mirror])
    envelope = np.exp(-(r_all**2))
    n_mirror = len(mirror)
    mirror_src = np.flatnonzero(r_pos > 0.0)

    sqf = np.exp(0.5 * log_factorials(n_max))
    entries = np.zeros((d, d, d, d), dtype=complex)
    fits: dict[tuple[int, int], PolyFit] = {}
    worst_cond = 0.0

    for parity, par_bit in (("even", 0), ("odd", 1)):
        powers = np.arange(par_bit, degree + 1, 2)
        if powers.size == 0:
            continue
        fibers = [(j, k) for j in range(d) for k in range(d) if (j - k) % 2 == par_bit]
        if not fibers:
            continue
        design = envelope[:, None] * np.power.outer(r_all, powers)
        data_pos = _gather_columns(outputs, fibers, threads)
        sign = 1.0 if par_bit == 0 else -1.0
        data = np.vstack([data_pos, sign * data_pos[mirror_src]])
        coeffs, residual_rms, cond, leverage = _solve_design(design, data)
        worst_cond = max(worst_cond, cond)
        _warn_if_ill_conditioned(cond, f"phase-invariant fit ({parity} parity)")

        for col, (j, k) in enumerate(fibers):
            full = np.zeros(degree + 1, dtype=complex)
            full[powers] = coeffs[:, col]
            fits[(j, k)] = PolyFit(
                jk=(j, k),
                parity=parity,
                degree=degree,
                coeffs=full,
                residual_rms=float(residual_rms[col]),
                condition_number=cond,
                leverage=leverage,
            )
            c = j - k
            for m in range(d):
                n = m - c
                if 0 <= n < d:
                    entries[m, n, j, k] = sqf[m] * sqf[n] * full[m + n]

    tensor = ProcessTensor(cutoff, entries, label="estimated(phase-invariant)")
    flagged = tuple(
        rec.amplitude
        for rec in records
        if truncation_weight(rec.amplitude, cutoff) < TRUNCATION_FLAG_THRESHOLD
    )
    return EstimationResult(tensor, fits, worst_cond, flagged)


def _general_design(
    alphas: np.ndarray, n_max: int
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    powers = [(a, b) for a in range(n_max + 1) for b in range(n_max + 1)]
    env = np.exp(-np.abs(alphas) ** 2)
    cols = [env * alphas**a * np.conj(alphas) ** b for a, b in powers]
    return np.stack(cols, axis=1), powers


def estimate_general(
    records: list[ProbeRecord], cutoff: FockCutoff, threads: int = 1
) -> EstimationResult:
    """Estimate a general single-mode tensor from complex-amplitude probes.

    Fits each output element as exp(-|alpha|^2) times a polynomial in
    (alpha, conj(alpha)) of per-variable degree N; the (m, n) monomial
    coefficient times sqrt(m! n!) is the tensor entry E^mn_jk.
    """
    if cutoff.modes != 1:
        raise CutoffMismatchError("use estimate_general_two_mode for two-mode data")
    _validate_records(records, cutoff)
    n_max, d = cutoff.n_max, cutoff.dim

    alphas = [rec.amplitude.values[0] for rec in records]
    rescaled = [rescale_heralded(rec).entries for rec in records]
    merged, outputs = _merge_duplicates(alphas, rescaled)
    needed = (n_max + 1) ** 2
    if len(merged) < needed:
        raise UnderdeterminedError(
            f"{len(merged)} distinct probe amplitudes cannot determine "
            f"{needed} monomial coefficients per output element"
        )

    design, powers = _general_design(np.asarray(merged, dtype=complex), n_max)
    fibers = [(j, k) for j in range(d) for k in range(d)]
    data = _gather_columns(outputs, fibers, threads)
    coeffs, residual_rms, cond, leverage = _solve_design(design, data)
    _warn_if_ill_conditioned(cond, "general fit")

    sqf = np.exp(0.5 * log_factorials(n_max))
    entries = np.zeros((d, d, d, d), dtype=complex)
    fits: dict[tuple[int, int], MonomialFit] = {}
    for col, (j, k) in enumerate(fibers):
        grid = coeffs[:, col].reshape(n_max + 1, n_max + 1)
        fits[(j, k)] = MonomialFit(
            jk=(j, k),
            degree=n_max,
            coeffs=grid,
            residual_rms=float(residual_rms[col]),
            condition_number=cond,
            leverage=leverage,
        )
        entries[:, :, j, k] = grid * np.outer(sqf, sqf)

    tensor = ProcessTensor(cutoff, entries, label="estimated(general)")
    flagged = tuple(
        rec.amplitude
        for rec in records
        if truncation_weight(rec.amplitude, cutoff) < TRUNCATION_FLAG_THRESHOLD
    )
    return EstimationResult(tensor, fits, cond, flagged)


def estimate_general_two_mode(
    records: list[ProbeRecord], cutoff: FockCutoff, threads: int = 1
) -> EstimationResult:
    """Two-mode analogue of :func:`estimate_general` (per-mode product monomials)."""
    if cutoff.modes != 2:
        raise CutoffMismatchError("estimate_general_two_mode requires a two-mode cutoff")
    if cutoff.n_max > TWO_MODE_ESTIMATION_NMAX_CAP:
        raise ValueError(
            f"two-mode estimation is capped at n_max={TWO_MODE_ESTIMATION_NMAX_CAP} "
            "(monomial count grows as (N+1)^4)"
        )
    _validate_records(records, cutoff)
    n_max, d = cutoff.n_max, cutoff.dim
    dd = n_max + 1

    pairs = [tuple(rec.amplitude.values) for rec in records]
    rescaled = [rescale_heralded(rec).entries for rec in records]
    merged, outputs = _merge_duplicates(pairs, rescaled)
    needed = dd**4
    if len(merged) < needed:
        raise UnderdeterminedError(
            f"{len(merged)} distinct probe pairs cannot determine {needed} "
            "monomial coefficients per output element"
        )

    a1 = np.array([p[0] for p in merged], dtype=complex)
    a2 = np.array([p[1] for p in merged], dtype=complex)
    env = np.exp(-(np.abs(a1) ** 2 + np.abs(a2) ** 2))
    cols = []
    for m1 in range(dd):
        for n1 in range(dd):
            base1 = a1**m1 * np.conj(a1) ** n1
            for m2 in range(dd):
                for n2 in range(dd):
                    cols.append(env * base1 * a2**m2 * np.conj(a2) ** n2)
    design = np.stack(cols, axis=1)

    fibers = [(j, k) for j in range(d * d) for k in range(d * d)]
    data = _gather_columns(outputs, fibers, threads)
    coeffs, residual_rms, cond, leverage = _solve_design(design, data)
    _warn_if_ill_conditioned(cond, "two-mode general fit")

    sqf = np.exp(0.5 * log_factorials(n_max))
    # coefficient axes (m1, n1, m2, n2, j_flat, k_flat) -> tensor order
    grid = coeffs.reshape(dd, dd, dd, dd, d * d, d * d)
    weight = np.einsum("a,b,c,e->abce", sqf, sqf, sqf, sqf)
    grid = grid * weight[..., None, None]
    ten = grid.transpose(0, 2, 1, 3, 4, 5).reshape(dd, dd, dd, dd, d, d, d, d)

    fits: dict[tuple, MonomialFit] = {}
    for col, (jf, kf) in enumerate(fibers):
        key = (jf // d, jf % d, kf // d, kf % d)
        fits[key] = MonomialFit(
            jk=key,
            degree=n_max,
            coeffs=coeffs[:, col].reshape(dd, dd, dd, dd),
            residual_rms=float(residual_rms[col]),
            condition_number=cond,
            leverage=leverage,
        )

    tensor = ProcessTensor(cutoff, ten, label="estimated(general,two-mode)")
    flagged = tuple(
        rec.amplitude
        for rec in records
        if truncation_weight(rec.amplitude, cutoff) < TRUNCATION_FLAG_THRESHOLD
    )
    return EstimationResult(tensor, fits, cond, flagged)
