"""Fluxonium-transmon-transmon tunable-coupler circuit simulator."""

__version__ = "0.1.0"

from .circuit import (
    CapacitanceNetwork,
    CircuitSpec,
    CouplingSet,
    FluxoniumParams,
    TransmonParams,
    Truncation,
    coupling_from_capacitances,
    invert_capacitance_matrix,
    parse_config,
    perturbative_inverse,
    spec_to_json,
)
from .hamiltonian import (
    Operator,
    SpectrumTable,
    bare_frequency,
    coupler_ej_for_frequency,
    eigensystem,
    fluxonium_hamiltonian,
    full_hamiltonian,
    minimum_gap,
    mode_operators,
    spectrum_scan,
    transmon_hamiltonian,
)
from .effective import (
    EffectiveModel,
    KerrPipelineResult,
    effective_coupling_curve,
    effective_parameters,
    find_flux_for_kerr,
    find_zero_coupling,
    kerr_flux_scan,
    kerr_pipeline,
    potential_minimum,
    swt_verify,
    taylor_coefficients,
)
from .dynamics import (
    GateResult,
    PulseEnvelope,
    PulseSequence,
    Trajectory,
    collapse_ops_from_T,
    drive_hamiltonian,
    envelope_eval,
    evolve_lindblad,
    evolve_unitary,
    iswap_unitary,
    simulate_iswap,
    simulate_x_half_pi,
    state_fidelity,
    two_level_ops,
)
from .catlab import (
    CorrelationMap,
    FockState,
    PhaseGrid,
    WignerMap,
    cat_correlation,
    coherent_state,
    displacement_operator,
    fringe_period_imaginary_cut,
    ideal_cat,
    kerr_evolve,
    square_grid,
    tau0_ns,
    tomography_sequence,
    wigner,
)
from .output import render_heatmap, render_linechart, write_table
