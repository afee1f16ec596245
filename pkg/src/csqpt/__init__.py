"""Coherent-state quantum process tomography on the truncated Fock space.

Reconstructs the Fock-basis superoperator of a quantum-optical process from
its action on coherent probe states, generates reference tensors and synthetic
probe data for the standard analytic processes, and provides cutoff-error
bounds.
"""

from .bounds import (
    CutoffBound,
    epsilon_from_gamma,
    gamma_from_epsilon,
    output_error_bound,
    required_cutoff,
    scaling_table,
)
from .fock import (
    CoherentAmplitude,
    DensityMatrix,
    FockCutoff,
    coherent_density,
    coherent_ket,
    embed,
    project_cutoff,
    trace_distance,
    truncation_weight,
)
from .io import (
    NoiseSpec,
    ProbeDataset,
    generate_synthetic,
    read_dataset,
    read_state,
    read_tensor,
    write_dataset,
    write_state,
    write_tensor,
)
from .processes import (
    ProcessParams,
    ProcessTensor,
    analytic_tensor,
    apply,
    choi_matrix,
    choi_min_eigenvalue,
    hyp2f1_terminating,
    parity_rule_deviation,
    symmetry_deviation,
    synthesize_probe_output,
    trace_rule_deviation,
)
from .tomography import (
    EstimationResult,
    MonomialFit,
    PolyFit,
    ProbeRecord,
    estimate_general,
    estimate_general_two_mode,
    estimate_phase_invariant,
    fit_diagnostics,
    recommended_radius_max,
    rescale_heralded,
)

__version__ = "0.1.0"

__all__ = [
    "CoherentAmplitude",
    "CutoffBound",
    "DensityMatrix",
    "EstimationResult",
    "FockCutoff",
    "MonomialFit",
    "NoiseSpec",
    "PolyFit",
    "ProbeDataset",
    "ProbeRecord",
    "ProcessParams",
    "ProcessTensor",
    "analytic_tensor",
    "apply",
    "choi_matrix",
    "choi_min_eigenvalue",
    "coherent_density",
    "coherent_ket",
    "embed",
    "epsilon_from_gamma",
    "estimate_general",
    "estimate_general_two_mode",
    "estimate_phase_invariant",
    "fit_diagnostics",
    "gamma_from_epsilon",
    "generate_synthetic",
    "hyp2f1_terminating",
    "output_error_bound",
    "parity_rule_deviation",
    "project_cutoff",
    "read_dataset",
    "read_state",
    "read_tensor",
    "recommended_radius_max",
    "required_cutoff",
    "rescale_heralded",
    "scaling_table",
    "symmetry_deviation",
    "synthesize_probe_output",
    "trace_distance",
    "trace_rule_deviation",
    "truncation_weight",
    "write_dataset",
    "write_state",
    "write_tensor",
]
