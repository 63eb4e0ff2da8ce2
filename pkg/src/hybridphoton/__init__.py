"""Simulation toolkit for hybrid photonic entanglement experiments:
polarization/spatial-mode two-photon states, disentanglement erasers,
far-field detection, Poisson counting, and state tomography."""

__version__ = "1.0.0"

from .core import (
    CompositeSpace,
    DensityOperator,
    Ket,
    NullProjectionError,
    Projector,
    SubsystemLabel,
    apply_unitary,
    partial_trace,
    project,
    project_subsystem,
    schmidt_decompose,
    tensor,
)
from .elements import (
    OpticsGeometry,
    WaveplateSpec,
    farfield_amplitude,
    intensity_curve,
    mode_family,
    polarization_mubs,
    spatial_qubit_mubs,
    sptq_cnot,
    sptq_cnot_reversed,
    waveplate_unitary,
)
from .measures import (
    concurrence,
    concurrence_from_conditional_counts,
    fidelity,
    negativity,
    purity,
    summarize_pattern,
    visibility,
)
from .protocol import (
    EraserSpec,
    PipelineResult,
    SourceParams,
    concentration_projector,
    generic_initial,
    hes_relative_phase,
    hyper_source,
    qudit_hes,
    run_irreversible,
    run_reversible,
    werner_mix,
)
from .simulate import (
    AcquisitionSpec,
    CountsTable,
    NoiseSpec,
    ScanCurve,
    born_probability,
    perturbed_pipeline,
    scan_run,
    tomography_counts,
)
from .tomography import (
    ProjectorSet,
    ReconstructionResult,
    bootstrap_errors,
    build_projector_set,
    linear_inversion,
    mle_reconstruct,
)
from .config import ConfigError, ScenarioConfig, load_config, parse_config

__all__ = [name for name in dir() if not name.startswith("_")]
