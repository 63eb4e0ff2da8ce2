import math

import numpy as np
import pytest

from hybridphoton.core import CompositeSpace, Ket, Projector, partial_trace
from hybridphoton.elements import KET_H, KET_L, KET_V, linear_polarizer_vector, mode_family
from hybridphoton.measures import concurrence, fidelity
from hybridphoton.protocol import (
    POL_IDLER,
    POL_SIGNAL,
    EraserSpec,
    SourceParams,
    concentration_projector,
    generic_initial,
    hes_relative_phase,
    hyper_source,
    polarizer_angle_degrees,
    qudit_hes,
    run_irreversible,
    run_reversible,
    spatial_idler,
    spatial_signal,
    werner_mix,
)

S = 1 / math.sqrt(2)


def l_eraser(mode=0):
    return EraserSpec(erasure_projector=Projector.from_vector(KET_L, name="L"),
                      idler_spatial_filter=mode)


def test_source_params_validation():
    with pytest.raises(ValueError):
        SourceParams(a=0.9, b=0.9)
    with pytest.raises(ValueError):
        SourceParams(c=1.0, d=0.1)


def test_eraser_spec_validation():
    with pytest.raises(ValueError):
        EraserSpec(variant="reversible", erasure_projector=Projector.from_vector(KET_L))
    with pytest.raises(ValueError):
        EraserSpec(variant="irreversible", erasure_projector=None)
    with pytest.raises(ValueError):
        EraserSpec(variant="partial", erasure_projector=Projector.from_vector(KET_L))


def test_hyper_source_structure():
    state = hyper_source(SourceParams())
    assert [lab.key for lab in state.space.labels] == [
        ("signal", "polarization"), ("idler", "polarization"),
        ("signal", "spatial"), ("idler", "spatial"),
    ]
    assert state.norm == pytest.approx(1.0)


def test_irreversible_pipeline_stages_and_probability():
    result = run_irreversible(hyper_source(SourceParams()), l_eraser())
    names = [name for name, _ in result.stage_states]
    assert names == ["source", "post_cnot", "post_filter", "post_erasure"]
    assert result.success_probability == pytest.approx(0.25, abs=1e-12)
    assert result.normalization**2 == pytest.approx(0.5, abs=1e-12)
    assert result.final_state.space.labels == (POL_IDLER, spatial_signal(2))
    with pytest.raises(KeyError):
        result.stage("post_reversal")


def test_bell_hes_canonical_form():
    result = run_irreversible(hyper_source(SourceParams()), l_eraser())
    fam = mode_family(2)
    target = Ket(
        CompositeSpace([POL_IDLER, spatial_signal(2)]),
        S * np.kron(KET_H, fam.mode(0)) + S * np.kron(KET_V, fam.mode(1)),
    )
    assert fidelity(result.final_state, target) == pytest.approx(1.0, abs=1e-12)
    assert hes_relative_phase(result.final_state) == pytest.approx(0.0, abs=1e-10)


def test_idler_filter_on_paired_mode():
    result = run_irreversible(hyper_source(SourceParams()), l_eraser(mode=1))
    # filtering on A keeps the d|AA> branch; the gate maps signal A -> F on V
    phase = hes_relative_phase(result.final_state, j=1)
    assert phase == pytest.approx(0.0, abs=1e-10)
    assert result.success_probability == pytest.approx(0.25, abs=1e-12)


def test_null_projection_flagged():
    spec = EraserSpec(
        erasure_projector=Projector.from_vector(KET_V), idler_spatial_filter=0
    )
    result = run_irreversible(hyper_source(SourceParams(a=1.0, b=0.0)), spec)
    assert result.null_projection
    assert result.final_state is None
    assert result.success_probability == 0.0


def test_reversible_eraser_restores_hybrid_entanglement():
    a, b = 0.6, 0.8
    result = run_reversible(generic_initial(a, b))
    names = [name for name, _ in result.stage_states]
    assert names == ["source", "post_cnot", "post_reversal"]
    assert result.success_probability == 1.0
    hybrid = partial_trace(result.final_state, [POL_IDLER, spatial_signal(2)])
    assert concurrence(hybrid) == pytest.approx(2 * a * b, abs=1e-10)
    # the signal polarization factors out after the second gate
    pol_s = partial_trace(result.final_state, [POL_SIGNAL])
    assert pol_s.purity == pytest.approx(1.0, abs=1e-10)


def test_reversible_matches_irreversible_at_45_degrees():
    a, b = 0.48, math.sqrt(1 - 0.48**2)
    rev = run_reversible(generic_initial(a, b))
    hybrid_rev = partial_trace(rev.final_state, [POL_IDLER, spatial_signal(2)])
    spec = EraserSpec(
        erasure_projector=Projector.from_vector(linear_polarizer_vector(math.pi / 4))
    )
    irr = run_irreversible(generic_initial(a, b), spec)
    assert fidelity(hybrid_rev, irr.final_state) == pytest.approx(1.0, abs=1e-10)


def test_reversible_rejects_hyperentangled_input():
    with pytest.raises(ValueError):
        run_reversible(hyper_source(SourceParams()))


def test_concentration_projector_angle_and_output():
    b = 0.46
    proj = concentration_projector(b)
    assert polarizer_angle_degrees(proj) == pytest.approx(math.degrees(math.acos(b)))
    a = math.sqrt(1 - b * b)
    spec = EraserSpec(erasure_projector=proj, idler_spatial_filter=0)
    result = run_irreversible(hyper_source(SourceParams(a=a, b=b)), spec)
    assert concurrence(result.final_state) == pytest.approx(1.0, abs=1e-10)
    assert result.normalization**2 == pytest.approx(2 * (a * b) ** 2, abs=1e-12)
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            concentration_projector(bad)


def test_polarizer_angle_rejects_circular():
    with pytest.raises(ValueError):
        polarizer_angle_degrees(Projector.from_vector(KET_L))


@pytest.mark.parametrize("dim", [2, 4, 8])
def test_qudit_hes_form(dim):
    fam = mode_family(dim)
    a, b = 0.6, 0.8
    for j in (0, dim - 1):
        result = qudit_hes(dim, a, b, j)
        target = Ket(
            CompositeSpace([POL_IDLER, spatial_signal(dim)]),
            a * np.kron(KET_H, fam.mode(j))
            + b * np.kron(KET_V, fam.mode(j + fam.pair_shift)),
        )
        assert fidelity(result.final_state, target) == pytest.approx(1.0, abs=1e-12)
        assert result.success_probability == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        qudit_hes(dim, a, b, dim)


def test_phase_propagation_through_erasure():
    phi = 0.37 * math.pi
    n = math.hypot(0.89, 0.46)
    src = SourceParams(a=0.89 / n, b=0.46 / n * np.exp(1j * phi))
    spec = EraserSpec(
        erasure_projector=Projector.from_vector(linear_polarizer_vector(math.pi / 4)),
        idler_spatial_filter=0,
    )
    result = run_irreversible(hyper_source(src), spec)
    assert hes_relative_phase(result.final_state) == pytest.approx(phi + math.pi / 2, abs=1e-10)
    # circular erasure absorbs the gate phase instead
    result_l = run_irreversible(hyper_source(src), l_eraser())
    assert hes_relative_phase(result_l.final_state) == pytest.approx(phi, abs=1e-10)


def test_werner_mix_properties():
    bell = Ket(CompositeSpace([POL_SIGNAL, POL_IDLER]), [S, 0, 0, S])
    rho = werner_mix(bell, 0.7)
    assert np.trace(rho.matrix).real == pytest.approx(1.0)
    assert rho.purity < 1.0
    np.testing.assert_allclose(werner_mix(bell, 1.0).matrix, bell.to_density().matrix,
                               atol=1e-12)
    with pytest.raises(ValueError):
        werner_mix(bell, 1.2)
