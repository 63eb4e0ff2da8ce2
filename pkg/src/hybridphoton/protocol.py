"""Generation pipeline: source states, both eraser variants, entanglement
concentration, Werner mixing, and qubit-qudit hybrid states.

Final kets are canonicalized (first nonzero amplitude real positive); state
comparisons elsewhere in the package are phase-insensitive fidelity checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    NORM_ATOL,
    CompositeSpace,
    DensityOperator,
    Ket,
    NullProjectionError,
    Projector,
    SubsystemLabel,
    apply_unitary,
    project_subsystem,
    tensor,
)
from .elements import KET_H, KET_L, KET_V, mode_family, sptq_cnot, sptq_cnot_reversed

POL_SIGNAL = SubsystemLabel("signal", "polarization", 2)
POL_IDLER = SubsystemLabel("idler", "polarization", 2)


def spatial_signal(dimension: int = 2) -> SubsystemLabel:
    return SubsystemLabel("signal", "spatial", dimension)


def spatial_idler(dimension: int = 2) -> SubsystemLabel:
    return SubsystemLabel("idler", "spatial", dimension)


def _check_pair_normalized(u: complex, v: complex, names: str):
    if abs(abs(u) ** 2 + abs(v) ** 2 - 1.0) > NORM_ATOL:
        raise ValueError(f"coefficients {names} must satisfy |{names[0]}|^2+|{names[-1]}|^2=1")


@dataclass(frozen=True)
class SourceParams:
    """Two-crystal source coefficients: (a, b) polarization, (c, d) spatial."""

    a: complex = 1 / math.sqrt(2)
    b: complex = 1 / math.sqrt(2)
    c: complex = 1 / math.sqrt(2)
    d: complex = 1 / math.sqrt(2)

    def __post_init__(self):
        _check_pair_normalized(self.a, self.b, "a,b")
        _check_pair_normalized(self.c, self.d, "c,d")


@dataclass(frozen=True)
class EraserSpec:
    """Which eraser to run and with which projections.

    ``erasure_projector`` acts on the signal polarization and is required for
    the irreversible variant (and forbidden for the reversible one);
    ``idler_spatial_filter`` selects the mode index the idler arm is filtered
    onto when starting from a hyperentangled state.
    """

    variant: str = "irreversible"
    erasure_projector: Projector | None = None
    idler_spatial_filter: int | None = None

    def __post_init__(self):
        if self.variant not in ("irreversible", "reversible"):
            raise ValueError(f"unknown eraser variant {self.variant!r}")
        if self.variant == "irreversible" and self.erasure_projector is None:
            raise ValueError("irreversible eraser requires an erasure projector")
        if self.variant == "reversible" and self.erasure_projector is not None:
            raise ValueError("reversible eraser takes no erasure projector")


@dataclass(frozen=True)
class PipelineResult:
    """Final state plus the per-stage bookkeeping of a pipeline run."""

    final_state: Ket | None
    stage_states: tuple
    success_probability: float
    normalization: float
    null_projection: bool = False

    def stage(self, name: str) -> Ket:
        for stage_name, state in self.stage_states:
            if stage_name == name:
                return state
        raise KeyError(f"no stage named {name!r}")


def generic_initial(a: complex, b: complex) -> Ket:
    """Three-qubit source state: entangled polarization pair times the signal
    spatial qubit prepared in the F mode (the spatial logical zero)."""
    _check_pair_normalized(a, b, "a,b")
    pol = Ket(CompositeSpace([POL_SIGNAL, POL_IDLER]),
              [a, 0.0, 0.0, b])
    fam = mode_family(2)
    spat = Ket(CompositeSpace([spatial_signal(2)]), fam.mode(0))
    return tensor([pol, spat])


def hyper_source(params: SourceParams, dimension: int = 2) -> Ket:
    """Hyperentangled two-photon state over polarization and slit modes."""
    fam = mode_family(dimension)
    pol = Ket(CompositeSpace([POL_SIGNAL, POL_IDLER]),
              [params.a, 0.0, 0.0, params.b])
    f0, f1 = fam.mode(0), fam.mode(fam.pair_shift)
    spat_amps = params.c * np.kron(f0, f0) + params.d * np.kron(f1, f1)
    spat = Ket(CompositeSpace([spatial_signal(dimension), spatial_idler(dimension)]), spat_amps)
    return tensor([pol, spat])


def _spatial_dimension(state: Ket) -> int:
    for lab in state.space.labels:
        if lab.key == ("signal", "spatial"):
            return lab.dimension
    raise ValueError("state has no signal spatial subsystem")


def run_irreversible(state: Ket, spec: EraserSpec, cnot: np.ndarray | None = None) -> PipelineResult:
    """Irreversible eraser: gate, optional idler spatial filter, polarization
    erasure. Starting from a hyperentangled state the filter stage is applied
    before erasure; starting from the three-qubit form it is skipped."""
    if spec.variant != "irreversible":
        raise ValueError("spec.variant must be 'irreversible'")
    dim = _spatial_dimension(state)
    gate = sptq_cnot(dim) if cnot is None else cnot
    stages = [("source", state)]
    current = apply_unitary(state, gate, [POL_SIGNAL, spatial_signal(dim)])
    stages.append(("post_cnot", current))

    filter_prob = 1.0
    if spatial_idler(dim) in state.space:
        fam = mode_family(dim)
        mode_index = spec.idler_spatial_filter if spec.idler_spatial_filter is not None else 0
        current, filter_prob = project_subsystem(current, fam.mode(mode_index), spatial_idler(dim))
        if current is None:
            return PipelineResult(None, tuple(stages), 0.0, 0.0, null_projection=True)
        stages.append(("post_filter", current))

    current, erase_prob = project_subsystem(
        current, spec.erasure_projector.principal_vector(), POL_SIGNAL
    )
    if current is None:
        return PipelineResult(None, tuple(stages), 0.0, 0.0, null_projection=True)
    current = current.canonicalized()
    stages.append(("post_erasure", current))
    return PipelineResult(
        final_state=current,
        stage_states=tuple(stages),
        success_probability=filter_prob * erase_prob,
        normalization=math.sqrt(erase_prob),
    )


def run_reversible(state: Ket) -> PipelineResult:
    """Reversible eraser: gate followed by the role-interchanged gate.

    Expects the three-qubit form (filter first when starting hyperentangled);
    deterministic, so the success probability is one.
    """
    if spatial_idler(2) in state.space:
        raise ValueError("reversible eraser expects the three-qubit (post-filter) form")
    targets = [POL_SIGNAL, spatial_signal(2)]
    stages = [("source", state)]
    current = apply_unitary(state, sptq_cnot(2), targets)
    stages.append(("post_cnot", current))
    current = apply_unitary(current, sptq_cnot_reversed(), targets).canonicalized()
    stages.append(("post_reversal", current))
    return PipelineResult(
        final_state=current,
        stage_states=tuple(stages),
        success_probability=1.0,
        normalization=1.0,
    )


def concentration_projector(b: complex) -> Projector:
    """Polarization projector that concentrates a partially entangled source
    into a maximally entangled hybrid state: |alpha| = |b|."""
    mag = abs(b)
    if mag <= NORM_ATOL or mag >= 1.0 - NORM_ATOL:
        raise ValueError("concentration requires 0 < |b| < 1")
    alpha = mag
    beta = math.sqrt(1.0 - mag * mag)
    return Projector.from_vector(alpha * KET_H + beta * KET_V, name="concentration")


def polarizer_angle_degrees(projector: Projector) -> float:
    """Transmission-axis angle (degrees from H) of a linear rank-1 projector."""
    vec = projector.principal_vector()
    vec = vec / (vec[np.argmax(np.abs(vec))] / abs(vec[np.argmax(np.abs(vec))]))
    if max(abs(vec[0].imag), abs(vec[1].imag)) > 1e-9:
        raise ValueError("projector is not a linear polarizer")
    return math.degrees(math.atan2(vec[1].real, vec[0].real)) % 180.0


def qudit_hes(dimension: int, a: complex, b: complex, j: int = 0) -> PipelineResult:
    """Qubit-qudit hybrid state a|F_j, H> + b|F_{j+n}, V> via the pipeline:
    polarization pair times |F_j F_j>, slit-array gate, idler filter on F_j,
    erasure onto L."""
    fam = mode_family(dimension)
    if not 0 <= j < dimension:
        raise ValueError(f"mode index {j} outside [0, {dimension})")
    _check_pair_normalized(a, b, "a,b")
    pol = Ket(CompositeSpace([POL_SIGNAL, POL_IDLER]), [a, 0.0, 0.0, b])
    spat_amps = np.kron(fam.mode(j), fam.mode(j))
    spat = Ket(CompositeSpace([spatial_signal(dimension), spatial_idler(dimension)]), spat_amps)
    source = tensor([pol, spat])
    spec = EraserSpec(
        variant="irreversible",
        erasure_projector=Projector.from_vector(KET_L, name="L"),
        idler_spatial_filter=j,
    )
    return run_irreversible(source, spec)


def werner_mix(state, p: float) -> DensityOperator:
    """Mix with white noise: p * rho + (1 - p) * I/d."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("mixing weight must lie in [0, 1]")
    rho = state.to_density() if isinstance(state, Ket) else state
    d = rho.space.total_dimension
    return DensityOperator(rho.space, p * rho.matrix + (1.0 - p) * np.eye(d) / d)


def hes_relative_phase(state: Ket, dimension: int = 2, j: int = 0) -> float:
    """Relative phase (radians) between the |F_j, H> and |F_{j+n}, V> branches
    of a hybrid state over (idler polarization, signal spatial)."""
    fam = mode_family(dimension)
    space = state.space
    target_h = tensor([
        Ket(CompositeSpace([POL_IDLER]), KET_H),
        Ket(CompositeSpace([spatial_signal(dimension)]), fam.mode(j)),
    ]) if space.labels[0].key == ("idler", "polarization") else None
    if target_h is None:
        raise ValueError("expected a state over (idler polarization, signal spatial)")
    target_v = tensor([
        Ket(CompositeSpace([POL_IDLER]), KET_V),
        Ket(CompositeSpace([spatial_signal(dimension)]), fam.mode(j + fam.pair_shift)),
    ])
    amp_h = target_h.overlap(state)
    amp_v = target_v.overlap(state)
    if abs(amp_h) < 1e-12 or abs(amp_v) < 1e-12:
        raise ValueError("state has no weight on one of the hybrid branches")
    return float(np.angle(amp_v / amp_h))
