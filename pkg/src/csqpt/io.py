"""Serialization of probe datasets, tensors, and states; synthetic data.

All files are line-oriented text with a one-line header; complex numbers are
written as ``re,im`` with 17 significant digits, which round-trips IEEE
doubles exactly.  Writers stage to a temporary file and rename atomically.

Dataset format::

    CSQPT-DATASET v1 modes=<M> nmax=<N>
    # key=value                      (metadata, sorted by key)
    alpha <re> <im>                  (one line per mode)
    herald <p>                       (optional; all records or none)
    <d^M rows of d^M entries "re,im" separated by single spaces>
    ... further records ...

Tensor format (structural zeros omitted)::

    CSQPT-TENSOR v1 modes=<M> nmax=<N> label=<text to end of line>
    m n j k <re> <im>                (single mode)
    m1 m2 n1 n2 j1 j2 k1 k2 <re> <im>  (two modes)

State format::

    CSQPT-STATE v1 modes=<M> nmax=<N>
    <d^M rows of d^M entries "re,im">

Noise model
-----------
Gaussian noise is generated by a fixed, named pipeline so datasets are
bit-reproducible independent of the platform RNG state:

* bit source: Philox-4x64-10 counter-based generator (numpy ``Philox``),
  keyed by the dataset seed, consumed as raw 64-bit words in order;
* uniforms: ``u = ((word >> 11) + 1) * 2**-53`` in (0, 1];
* normals: Box-Muller pairs ``sqrt(-2 ln u1) * (cos, sin)(2 pi u2)`` taken
  from consecutive word pairs;
* per record, the first d^2M normals perturb the real parts (row-major), the
  next d^2M the imaginary parts; the matrix is then re-Hermitized via
  (X + X^dag)/2 and renormalized to unit trace.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DatasetFormatError,
    DegenerateInputError,
    TensorSymmetryWarning,
    TruncationWarning,
    VersionMismatchError,
)
from .fock import CoherentAmplitude, DensityMatrix, FockCutoff, coherent_density, truncation_weight
from .processes import ProcessParams, ProcessTensor, analytic_tensor, apply, symmetry_deviation
from .tomography import ProbeRecord

SCHEMA_VERSION = 1
INGEST_HERMITICITY_TOL = 1e-9
INGEST_TRACE_TOL = 1e-6
SYMMETRY_WARN_TOL = 1e-6
MIN_SYNTH_WEIGHT_WARN = 0.9
MIN_SYNTH_WEIGHT_HARD = 0.01


@dataclass(frozen=True)
class NoiseSpec:
    """Reproducible Gaussian perturbation: std dev per real/imag component."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        object.__setattr__(self, "seed", int(self.seed) & (2**64 - 1))


@dataclass(frozen=True)
class ProbeDataset:
    """A cutoff, a list of probe records, and free-form metadata."""

    cutoff: FockCutoff
    records: tuple[ProbeRecord, ...]
    metadata: dict[str, str] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise VersionMismatchError(
                f"unsupported schema version {self.schema_version}"
            )
        object.__setattr__(self, "records", tuple(self.records))
        for i, rec in enumerate(self.records):
            if rec.output.cutoff != self.cutoff:
                raise DatasetFormatError(
                    f"record {i}: cutoff {rec.output.cutoff} does not match dataset {self.cutoff}"
                )
        with_herald = sum(r.herald_probability is not None for r in self.records)
        if with_herald not in (0, len(self.records)):
            raise DatasetFormatError(
                f"herald_probability present on {with_herald} of {len(self.records)} records; "
                "must be all or none"
            )


def _philox_normals(seed: int, count: int) -> np.ndarray:
    """`count` standard normals from the documented Philox/Box-Muller pipeline."""
    pairs = (count + 1) // 2
    words = np.random.Philox(key=seed).random_raw(2 * pairs)
    u = ((words >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * math.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


def generate_synthetic(
    params: ProcessParams,
    cutoff: FockCutoff,
    amplitudes: list[CoherentAmplitude],
    noise: NoiseSpec = NoiseSpec(),
    metadata: dict[str, str] | None = None,
) -> ProbeDataset:
    """Synthesize probe records from an analytic process tensor.

    Each record stores the unit-trace normalized output (mimicking homodyne
    reconstruction) together with the within-cutoff trace of the raw output as
    the herald probability, so estimation can undo the normalization exactly.
    """
    if not amplitudes:
        raise ValueError("at least one probe amplitude is required")
    tensor = analytic_tensor(params, cutoff)
    weights = [truncation_weight(a, cutoff) for a in amplitudes]
    min_weight = min(weights)
    if min_weight < MIN_SYNTH_WEIGHT_HARD:
        raise DegenerateInputError(
            f"probe amplitude keeps only {min_weight:.3g} of its weight below the "
            f"cutoff; the synthetic ground truth would be meaningless"
        )
    if min_weight < MIN_SYNTH_WEIGHT_WARN:
        warnings.warn(
            f"minimum probe truncation weight is {min_weight:.4f}; the dataset "
            "represents the truncated process, not the physical one",
            TruncationWarning,
            stacklevel=2,
        )

    dim = cutoff.total_dim
    normals_per_record = 2 * dim * dim
    all_normals = (
        _philox_normals(noise.seed, normals_per_record * len(amplitudes))
        if noise.sigma > 0.0
        else None
    )

    records = []
    for idx, alpha in enumerate(amplitudes):
        raw = apply(tensor, coherent_density(alpha, cutoff))
        herald = raw.trace
        if herald < 1e-12:
            raise DegenerateInputError(
                f"process output has vanishing trace at amplitude {alpha.values}; "
                "the heralding event never fires there"
            )
        mat = raw.entries / herald
        if all_normals is not None:
            block = all_normals[idx * normals_per_record : (idx + 1) * normals_per_record]
            perturb = noise.sigma * (
                block[: dim * dim].reshape(dim, dim)
                + 1j * block[dim * dim :].reshape(dim, dim)
            )
            mat = mat + perturb
            mat = 0.5 * (mat + mat.conj().T)
            tr = float(np.trace(mat).real)
            if tr <= 0.0:
                raise DegenerateInputError(
                    f"noise destroyed the record at amplitude {alpha.values}"
                )
            mat = mat / tr
        records.append(
            ProbeRecord(
                amplitude=alpha,
                output=DensityMatrix(cutoff, mat),
                herald_probability=herald,
            )
        )

    meta = {
        "process": params.label,
        "noise_sigma": f"{noise.sigma:.17g}",
        "noise_seed": str(noise.seed),
        "min_truncation_weight": f"{min_weight:.17g}",
    }
    if metadata:
        meta.update(metadata)
    return ProbeDataset(cutoff=cutoff, records=tuple(records), metadata=meta)


# ---------------------------------------------------------------------------
# text formats
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g},{z.imag:.17g}"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _parse_header(line: str, magic: str, path: str) -> tuple[FockCutoff, list[str]]:
    tokens = line.split()
    if len(tokens) < 2 or tokens[0] != magic:
        raise DatasetFormatError(f"{path}:1: expected '{magic} v1 ...' header")
    if tokens[1] != f"v{SCHEMA_VERSION}":
        raise VersionMismatchError(
            f"{path}:1: unsupported version {tokens[1]!r} (expected v{SCHEMA_VERSION})"
        )
    fields = {}
    rest = []
    for tok in tokens[2:]:
        if "=" in tok:
            key, _, val = tok.partition("=")
            if key in ("modes", "nmax"):
                fields[key] = val
                continue
        rest.append(tok)
    try:
        cutoff = FockCutoff(n_max=int(fields["nmax"]), modes=int(fields["modes"]))
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"{path}:1: bad or missing modes=/nmax= field ({exc})")
    return cutoff, rest


def _parse_complex(token: str, where: str) -> complex:
    parts = token.split(",")
    if len(parts) != 2:
        raise DatasetFormatError(f"{where}: expected 're,im', got {token!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise DatasetFormatError(f"{where}: cannot parse complex entry {token!r}")


def write_dataset(dataset: ProbeDataset, path: str) -> None:
    cut = dataset.cutoff
    lines = [f"CSQPT-DATASET v{dataset.schema_version} modes={cut.modes} nmax={cut.n_max}"]
    for key in sorted(dataset.metadata):
        lines.append(f"# {key}={dataset.metadata[key]}")
    for rec in dataset.records:
        for v in rec.amplitude.values:
            lines.append(f"alpha {_fmt(v.real)} {_fmt(v.imag)}")
        if rec.herald_probability is not None:
            lines.append(f"herald {_fmt(rec.herald_probability)}")
        for row in rec.output.entries:
            lines.append(" ".join(_fmt_complex(z) for z in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_dataset(path: str) -> ProbeDataset:
    with open(path) as fh:
        raw_lines = fh.read().splitlines()
    if not raw_lines:
        raise DatasetFormatError(f"{path}: empty file")
    cutoff, _ = _parse_header(raw_lines[0], "CSQPT-DATASET", path)
    dim = cutoff.total_dim

    metadata: dict[str, str] = {}
    body: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw_lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            metadata[key.strip()] = val
            continue
        body.append((lineno, line))

    records: list[ProbeRecord] = []
    pos = 0
    while pos < len(body):
        rec_index = len(records)

        def fail(msg: str, lineno: int) -> DatasetFormatError:
            return DatasetFormatError(f"{path}:{lineno}: record {rec_index}: {msg}")

        values = []
        for _ in range(cutoff.modes):
            if pos >= len(body):
                raise DatasetFormatError(f"{path}: record {rec_index}: truncated amplitude block")
            lineno, line = body[pos]
            parts = line.split()
            if len(parts) != 3 or parts[0] != "alpha":
                raise fail(f"expected 'alpha <re> <im>', got {line!r}", lineno)
            try:
                values.append(complex(float(parts[1]), float(parts[2])))
            except ValueError:
                raise fail(f"cannot parse amplitude {line!r}", lineno)
            pos += 1

        herald = None
        if pos < len(body) and body[pos][1].startswith("herald"):
            lineno, line = body[pos]
            parts = line.split()
            if len(parts) != 2:
                raise fail(f"expected 'herald <p>', got {line!r}", lineno)
            try:
                herald = float(parts[1])
            except ValueError:
                raise fail(f"cannot parse herald probability {line!r}", lineno)
            if not math.isfinite(herald) or herald < 0.0:
                raise fail(f"herald probability must be finite and >= 0, got {herald}", lineno)
            pos += 1

        if pos + dim > len(body):
            raise DatasetFormatError(
                f"{path}: record {rec_index}: truncated matrix block "
                f"(expected {dim} rows)"
            )
        mat = np.zeros((dim, dim), dtype=complex)
        for row in range(dim):
            lineno, line = body[pos]
            tokens = line.split()
            if len(tokens) != dim:
                raise fail(f"expected {dim} entries per row, got {len(tokens)}", lineno)
            for col, tok in enumerate(tokens):
                mat[row, col] = _parse_complex(tok, f"{path}:{lineno}: record {rec_index}")
            pos += 1

        deviation = float(np.max(np.abs(mat - mat.conj().T)))
        if deviation > INGEST_HERMITICITY_TOL:
            raise DatasetFormatError(
                f"{path}: record {rec_index}: output is not Hermitian "
                f"(max deviation {deviation:.3e} > {INGEST_HERMITICITY_TOL:.0e})"
            )
        mat = 0.5 * (mat + mat.conj().T)
        trace = float(np.trace(mat).real)
        if abs(trace - 1.0) > INGEST_TRACE_TOL:
            raise DatasetFormatError(
                f"{path}: record {rec_index}: output trace {trace!r} is not 1 "
                f"within {INGEST_TRACE_TOL:.0e}"
            )
        try:
            records.append(
                ProbeRecord(
                    amplitude=CoherentAmplitude(values),
                    output=DensityMatrix(cutoff, mat),
                    herald_probability=herald,
                )
            )
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: record {rec_index}: {exc}")

    try:
        return ProbeDataset(cutoff=cutoff, records=tuple(records), metadata=metadata)
    except DatasetFormatError as exc:
        raise DatasetFormatError(f"{path}: {exc}")


def write_tensor(tensor: ProcessTensor, path: str) -> None:
    cut = tensor.cutoff
    label = tensor.label.replace("\n", " ")
    lines = [f"CSQPT-TENSOR v{SCHEMA_VERSION} modes={cut.modes} nmax={cut.n_max} label={label}"]
    flat = tensor.entries.ravel()
    nz = np.flatnonzero(flat)
    shape = tensor.entries.shape
    for flat_idx in nz:
        idx = np.unravel_index(flat_idx, shape)
        z = flat[flat_idx]
        lines.append(" ".join(str(i) for i in idx) + f" {z.real:.17g} {z.imag:.17g}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_tensor(path: str) -> ProcessTensor:
    with open(path) as fh:
        raw_lines = fh.read().splitlines()
    if not raw_lines:
        raise DatasetFormatError(f"{path}: empty file")
    header = raw_lines[0]
    cutoff, _ = _parse_header(header, "CSQPT-TENSOR", path)
    _, _, label = header.partition("label=")
    rank = 4 * cutoff.modes
    entries = np.zeros((cutoff.dim,) * rank, dtype=complex)
    for lineno, line in enumerate(raw_lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != rank + 2:
            raise DatasetFormatError(
                f"{path}:{lineno}: expected {rank} indices + re + im, got {len(tokens)} fields"
            )
        try:
            idx = tuple(int(t) for t in tokens[:rank])
            val = complex(float(tokens[rank]), float(tokens[rank + 1]))
        except ValueError:
            raise DatasetFormatError(f"{path}:{lineno}: cannot parse tensor row {line!r}")
        if any(i < 0 or i > cutoff.n_max for i in idx):
            raise DatasetFormatError(
                f"{path}:{lineno}: index {idx} outside 0..{cutoff.n_max}"
            )
        entries[idx] = val
    tensor = ProcessTensor(cutoff, entries, label=label)
    dev = symmetry_deviation(tensor)
    if dev > SYMMETRY_WARN_TOL:
        warnings.warn(
            f"{path}: tensor violates the Hermiticity-preservation symmetry "
            f"(deviation {dev:.3e})",
            TensorSymmetryWarning,
            stacklevel=2,
        )
    return tensor


def write_state(state: DensityMatrix, path: str) -> None:
    cut = state.cutoff
    lines = [f"CSQPT-STATE v{SCHEMA_VERSION} modes={cut.modes} nmax={cut.n_max}"]
    for row in state.entries:
        lines.append(" ".join(_fmt_complex(z) for z in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_state(path: str) -> DensityMatrix:
    with open(path) as fh:
        raw_lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not raw_lines:
        raise DatasetFormatError(f"{path}: empty file")
    cutoff, _ = _parse_header(raw_lines[0], "CSQPT-STATE", path)
    dim = cutoff.total_dim
    if len(raw_lines) - 1 != dim:
        raise DatasetFormatError(
            f"{path}: expected {dim} matrix rows, found {len(raw_lines) - 1}"
        )
    mat = np.zeros((dim, dim), dtype=complex)
    for row, line in enumerate(raw_lines[1:]):
        tokens = line.split()
        if len(tokens) != dim:
            raise DatasetFormatError(
                f"{path}:{row + 2}: expected {dim} entries per row, got {len(tokens)}"
            )
        for col, tok in enumerate(tokens):
            mat[row, col] = _parse_complex(tok, f"{path}:{row + 2}")
    deviation = float(np.max(np.abs(mat - mat.conj().T)))
    if deviation > INGEST_HERMITICITY_TOL:
        raise DatasetFormatError(
            f"{path}: state is not Hermitian (max deviation {deviation:.3e})"
        )
    return DensityMatrix(cutoff, 0.5 * (mat + mat.conj().T))
