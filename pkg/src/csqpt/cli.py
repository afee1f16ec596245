"""Command-line front end for the tomography pipeline.

Exit codes: 0 success, 2 invalid flags, 3 generation error, 4 underdetermined
estimation, 5 ill-conditioned estimation (tensor still written), 6 cutoff
mismatch.  Every subcommand is deterministic given its flags; seeds are
explicit and thread count never changes results.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings

import numpy as np

from . import io as qio
from .bounds import CutoffBound, epsilon_from_gamma, scaling_table
from .errors import (
    CutoffMismatchError,
    DatasetFormatError,
    DegenerateInputError,
    SaturationError,
    UnderdeterminedError,
)
from .fock import CoherentAmplitude, DensityMatrix, FockCutoff, truncation_weight
from .processes import (
    PROCESS_KINDS,
    ProcessParams,
    analytic_tensor,
    apply,
    choi_min_eigenvalue,
    parity_rule_deviation,
    symmetry_deviation,
    trace_rule_deviation,
)
from .tomography import (
    estimate_general,
    estimate_general_two_mode,
    estimate_phase_invariant,
)

EXIT_OK = 0
EXIT_FLAGS = 2
EXIT_GENERATION = 3
EXIT_UNDERDETERMINED = 4
EXIT_ILL_CONDITIONED = 5
EXIT_MISMATCH = 6

RULE_TOL = 1e-10


class FlagError(Exception):
    """Invalid flag combination or value; message names the offending flag."""


def _parse_param_map(text: str | None) -> dict[str, float]:
    out: dict[str, float] = {}
    if not text:
        return out
    for item in text.split(","):
        if not item:
            continue
        key, sep, val = item.partition("=")
        if not sep:
            raise FlagError(f"--params: expected key=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise FlagError(f"--params: cannot parse value in {item!r}")
    return out


def _build_params(process: str, params_text: str | None) -> ProcessParams:
    values = _parse_param_map(params_text)
    needed = {"attenuation": "eta", "beam_splitter": "theta", "pdc": "r"}.get(process)
    for key in values:
        if key != needed:
            raise FlagError(f"--params: {process} does not take parameter {key!r}")
    if needed is not None and needed not in values:
        raise FlagError(f"--params: {process} requires {needed}=<value>")
    try:
        if process == "attenuation":
            return ProcessParams.attenuation(values["eta"])
        if process == "beam_splitter":
            return ProcessParams.beam_splitter(values["theta"])
        if process == "pdc":
            return ProcessParams.pdc(values["r"])
        return ProcessParams(process)
    except ValueError as exc:
        raise FlagError(f"--params: {exc}")


def _parse_radii(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise FlagError(f"--radii: expected start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise FlagError(f"--radii: cannot parse {text!r}")
    if count < 1:
        raise FlagError("--radii: count must be >= 1")
    return [float(r) for r in np.linspace(start, stop, count)]


def _parse_grid(text: str) -> list[complex]:
    rings_text, sep, phases_text = text.partition(":")
    if not sep:
        raise FlagError(f"--grid: expected rings:phases, got {text!r}")
    try:
        rings = [float(r) for r in rings_text.split(",") if r]
        phases = int(phases_text)
    except ValueError:
        raise FlagError(f"--grid: cannot parse {text!r}")
    if not rings or phases < 1:
        raise FlagError("--grid: need at least one ring and one phase")
    points = []
    for ring in rings:
        for t in range(phases):
            angle = 2.0 * math.pi * t / phases
            points.append(complex(ring * math.cos(angle), ring * math.sin(angle)))
    return points


def _parse_state(text: str, cutoff: FockCutoff) -> DensityMatrix:
    kind, sep, spec = text.partition(":")
    if not sep:
        raise FlagError(f"--state: expected kind:spec, got {text!r}")
    if kind == "file":
        return qio.read_state(spec)
    if kind == "fock":
        try:
            ns = [int(x) for x in spec.split(",")]
        except ValueError:
            raise FlagError(f"--state: cannot parse Fock indices {spec!r}")
        if len(ns) != cutoff.modes:
            raise FlagError(f"--state: expected {cutoff.modes} Fock index(es)")
        if any(n < 0 or n > cutoff.n_max for n in ns):
            raise FlagError(f"--state: Fock index outside 0..{cutoff.n_max}")
        flat = 0
        for n in ns:
            flat = flat * cutoff.dim + n
        mat = np.zeros((cutoff.total_dim, cutoff.total_dim), dtype=complex)
        mat[flat, flat] = 1.0
        return DensityMatrix(cutoff, mat)
    if kind == "coherent":
        mode_specs = spec.split(";")
        if len(mode_specs) != cutoff.modes:
            raise FlagError(
                f"--state: expected {cutoff.modes} amplitude(s) separated by ';'"
            )
        values = []
        for ms in mode_specs:
            parts = ms.split(",")
            try:
                re = float(parts[0])
                im = float(parts[1]) if len(parts) > 1 else 0.0
            except (ValueError, IndexError):
                raise FlagError(f"--state: cannot parse amplitude {ms!r}")
            values.append(complex(re, im))
        from .fock import coherent_density

        return coherent_density(CoherentAmplitude(values), cutoff)
    raise FlagError(f"--state: unknown kind {kind!r} (use coherent:, fock:, file:)")


def _threads_flag(value: int | None) -> int:
    if value is None:
        env = os.environ.get("CSQPT_THREADS", "")
        try:
            value = int(env) if env else 1
        except ValueError:
            raise FlagError(f"CSQPT_THREADS: cannot parse {env!r}")
    if value < 1:
        raise FlagError("--threads must be >= 1")
    return value


def _cmd_synth(args: argparse.Namespace) -> int:
    params = _build_params(args.process, args.params)
    modes = args.modes if args.modes is not None else params.modes
    if modes != params.modes:
        raise FlagError(
            f"--modes: {args.process} is a {params.modes}-mode process, got --modes {modes}"
        )
    cutoff = FockCutoff(n_max=args.nmax, modes=modes)

    if (args.radii is None) == (args.grid is None):
        raise FlagError("exactly one of --radii or --grid is required")
    if args.radii is not None:
        singles = [complex(r, 0.0) for r in _parse_radii(args.radii)]
    else:
        singles = _parse_grid(args.grid)
    if modes == 1:
        amplitudes = [CoherentAmplitude(a) for a in singles]
    else:
        amplitudes = [CoherentAmplitude((a, b)) for a in singles for b in singles]

    noise = qio.NoiseSpec(sigma=args.noise_sigma, seed=args.seed)
    try:
        dataset = qio.generate_synthetic(params, cutoff, amplitudes, noise)
    except (DegenerateInputError, ValueError) as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    qio.write_dataset(dataset, args.out)
    min_weight = min(truncation_weight(a, cutoff) for a in amplitudes)
    print(f"wrote {len(dataset.records)} records to {args.out}")
    print(f"min truncation_weight = {min_weight:.6g}")
    return EXIT_OK


def _cmd_estimate(args: argparse.Namespace) -> int:
    threads = _threads_flag(args.threads)
    dataset = qio.read_dataset(args.input)
    records = list(dataset.records)
    cutoff = dataset.cutoff
    try:
        if args.mode == "phase-invariant":
            result = estimate_phase_invariant(records, cutoff, threads=threads)
        elif cutoff.modes == 2:
            result = estimate_general_two_mode(records, cutoff, threads=threads)
        else:
            result = estimate_general(records, cutoff, threads=threads)
    except UnderdeterminedError as exc:
        print(f"underdetermined: {exc}", file=sys.stderr)
        return EXIT_UNDERDETERMINED
    qio.write_tensor(result.tensor, args.out)
    if args.report:
        lines = ["jk,residual_rms,condition_number"]
        for key in sorted(result.fits):
            fit = result.fits[key]
            jk = ":".join(str(i) for i in (key if isinstance(key, tuple) else (key,)))
            lines.append(f"{jk},{fit.residual_rms:.17g},{fit.condition_number:.17g}")
        qio._atomic_write(args.report, "\n".join(lines) + "\n")
    print(f"wrote tensor to {args.out}")
    print(f"condition_number = {result.condition_number:.6g}")
    if result.flagged_amplitudes:
        print(f"flagged {len(result.flagged_amplitudes)} low-truncation-weight probes")
    if result.ill_conditioned:
        print("WARNING: fit is ill-conditioned; tensor written but flagged", file=sys.stderr)
        return EXIT_ILL_CONDITIONED
    return EXIT_OK


def _cmd_apply(args: argparse.Namespace) -> int:
    tensor = qio.read_tensor(args.tensor)
    state = _parse_state(args.state, tensor.cutoff)
    out = apply(tensor, state)
    if args.out:
        qio.write_state(out, args.out)
    print(f"trace = {out.trace:.17g}")
    return EXIT_OK


def _cmd_analytic(args: argparse.Namespace) -> int:
    params = _build_params(args.process, args.params)
    modes = args.modes if args.modes is not None else params.modes
    if modes != params.modes:
        raise FlagError(
            f"--modes: {args.process} is a {params.modes}-mode process, got --modes {modes}"
        )
    tensor = analytic_tensor(params, FockCutoff(n_max=args.nmax, modes=modes))
    qio.write_tensor(tensor, args.out)
    print(f"wrote {params.label} tensor to {args.out}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    ta = qio.read_tensor(args.a)
    tb = qio.read_tensor(args.b)
    if ta.cutoff != tb.cutoff:
        print(
            f"cutoff mismatch: {ta.cutoff} vs {tb.cutoff}",
            file=sys.stderr,
        )
        return EXIT_MISMATCH
    max_err = float(np.max(np.abs(ta.entries - tb.entries)))
    print(f"max elementwise error = {max_err:.17g}")
    for name, t in (("a", ta), ("b", tb)):
        print(f"symmetry deviation {name} = {symmetry_deviation(t):.17g}")
        print(f"choi min eigenvalue {name} = {choi_min_eigenvalue(t):.17g}")
    return EXIT_OK


def _cmd_error_bound(args: argparse.Namespace) -> int:
    given = [x is not None for x in (args.epsilon, args.gamma, args.nmax)]
    if sum(given) != 1:
        raise FlagError("exactly one of --epsilon, --gamma, --nmax is required")
    try:
        if args.epsilon is not None:
            bound = CutoffBound.from_epsilon(args.epsilon, args.energy, args.omega)
        elif args.gamma is not None:
            bound = CutoffBound.from_gamma(args.gamma, args.energy, args.omega)
        else:
            gamma = args.energy / ((args.nmax + 1.5) * args.omega)
            if not 0.0 < gamma < 1.0:
                raise FlagError(
                    f"--nmax: implies gamma={gamma:g} outside (0, 1); increase N"
                )
            bound = CutoffBound.from_gamma(gamma, args.energy, args.omega)
    except (ValueError, SaturationError) as exc:
        if isinstance(exc, FlagError):
            raise
        raise FlagError(str(exc))
    print(f"gamma = {bound.gamma:.17g}")
    print(f"epsilon = {bound.epsilon:.17g}")
    print(f"required_n (minimal N with U/h_(N+1) <= gamma) = {bound.required_n}")
    print(f"paper_estimate (U/gamma) = {bound.paper_style_cutoff:.6g}")
    print(
        "note: the U/gamma figure is the conservative order-of-magnitude estimate; "
        "it sits a factor ~10 above the worked example's quoted 250 and both are "
        "upper bounds, so the exact inequality value above is authoritative"
    )
    table_n = [int(x) for x in args.table.split(",") if x]
    print("N,gamma,epsilon,epsilon_sqrtN")
    for n, gamma, eps in scaling_table(args.energy, args.omega, table_n):
        print(f"{n},{gamma:.17g},{eps:.17g},{eps * math.sqrt(n):.17g}")
    return EXIT_OK


def _cmd_diagnose(args: argparse.Namespace) -> int:
    tensor = qio.read_tensor(args.tensor)
    violations = 0
    trace_dev = float(np.max(np.abs(trace_rule_deviation(tensor))))
    print(f"trace rule max deviation = {trace_dev:.17g}")
    if trace_dev > RULE_TOL:
        violations += 1
    if tensor.cutoff.modes == 1:
        parity_dev = parity_rule_deviation(tensor)
        print(f"parity rule max off-rule magnitude = {parity_dev:.17g}")
        if parity_dev > RULE_TOL:
            violations += 1
    sym_dev = symmetry_deviation(tensor)
    print(f"symmetry deviation = {sym_dev:.17g}")
    if sym_dev > RULE_TOL:
        violations += 1
    print(f"violations: {violations}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csqpt",
        description="Coherent-state quantum process tomography toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic probe dataset")
    p.add_argument("--process", required=True, choices=PROCESS_KINDS)
    p.add_argument("--params", help="comma-separated key=value (eta=, theta=, r=)")
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--modes", type=int, choices=(1, 2))
    p.add_argument("--radii", help="start:stop:count real radii")
    p.add_argument("--grid", help="r1,r2,...:phases ring grid of complex amplitudes")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("estimate", help="estimate a process tensor from a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mode", choices=("phase-invariant", "general"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="per-element CSV of residuals and conditioning")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("apply", help="apply a tensor file to a state")
    p.add_argument("--tensor", required=True)
    p.add_argument("--state", required=True, help="coherent:re[,im] | fock:n | file:path")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("analytic", help="write a closed-form process tensor")
    p.add_argument("--process", required=True, choices=PROCESS_KINDS)
    p.add_argument("--params", help="comma-separated key=value (eta=, theta=, r=)")
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--modes", type=int, choices=(1, 2))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_analytic)

    p = sub.add_parser("compare", help="compare two tensor files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("error-bound", help="cutoff error calculus")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--nmax", type=int)
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--table", default="100,1000,10000,100000")
    p.set_defaults(func=_cmd_error_bound)

    p = sub.add_parser("diagnose", help="report rule violations of a tensor file")
    p.add_argument("--tensor", required=True)
    p.set_defaults(func=_cmd_diagnose)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FlagError as exc:
        print(f"flag error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except CutoffMismatchError as exc:
        print(f"cutoff mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (DatasetFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION


if __name__ == "__main__":
    sys.exit(main())
