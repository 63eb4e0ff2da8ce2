"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Criterion 4 is split: the pipeline-level checks (concurrence, success
probability against the closed form) pass; the literal rounded targets
(62.5 degrees, 0.335) are asserted separately and fail honestly because they
are inconsistent with their own defining expressions at the stated
tolerances (arccos(0.46) = 62.61 degrees; 2|ab|^2 = 0.3337 normalized or
0.3352 unnormalized). The analysis lives in the project decision ledger.
"""

import filecmp
import json
import math
import os

import numpy as np

from hybridphoton import cli
from hybridphoton.core import CompositeSpace, Ket, Projector, partial_trace
from hybridphoton.elements import (
    KET_H,
    KET_L,
    KET_V,
    OpticsGeometry,
    linear_polarizer_vector,
    mode_family,
    sptq_cnot,
)
from hybridphoton.measures import (
    ConditionalCounts,
    concurrence,
    concurrence_from_conditional_counts,
    fidelity,
    negativity,
)
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
    spatial_signal,
    werner_mix,
)
from hybridphoton.simulate import (
    AcquisitionSpec,
    NoiseSpec,
    perturbed_pipeline,
    sample_counts,
    tomography_counts,
)
from hybridphoton.tomography import bootstrap_errors, build_projector_set, mle_reconstruct

S = 1 / math.sqrt(2)


def report(criterion: str, ok: bool, detail: str):
    line = f"[acceptance {criterion}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


def l_eraser(mode=0):
    return EraserSpec(erasure_projector=Projector.from_vector(KET_L, name="L"),
                      idler_spatial_filter=mode)


def test_acceptance_01_truth_table():
    fam = mode_family(2)
    gate = sptq_cnot(2)
    inputs = [np.kron(p, m) for p in (KET_H, KET_V) for m in (fam.mode(0), fam.mode(1))]
    expected = [
        np.kron(KET_H, fam.mode(0)),
        np.kron(KET_H, fam.mode(1)),
        1j * np.kron(KET_V, fam.mode(1)),
        1j * np.kron(KET_V, fam.mode(0)),
    ]
    worst = 0.0
    for vec_in, vec_out in zip(inputs, expected):
        out = gate @ vec_in
        off_target = float(np.linalg.norm(out - vec_out) ** 2)
        worst = max(worst, off_target)
    report("1 truth table", worst < 1e-12, f"worst off-target probability {worst:.2e}")


def test_acceptance_02_bell_hes_pipeline():
    result = run_irreversible(hyper_source(SourceParams()), l_eraser())
    fam = mode_family(2)
    target = Ket(
        CompositeSpace([POL_IDLER, spatial_signal(2)]),
        S * np.kron(KET_H, fam.mode(0)) + S * np.kron(KET_V, fam.mode(1)),
    )
    f = fidelity(result.final_state, target)
    p = result.success_probability
    report("2 Bell HES pipeline",
           abs(f - 1.0) < 1e-10 and abs(p - 0.25) < 1e-12,
           f"fidelity {f:.12f}, success probability {p:.14f}")


def test_acceptance_03_phase_propagation():
    phi_in = 0.37 * math.pi
    n = math.hypot(0.89, 0.46)
    src = SourceParams(a=0.89 / n, b=0.46 / n * np.exp(1j * phi_in))
    spec = EraserSpec(
        erasure_projector=Projector.from_vector(linear_polarizer_vector(math.pi / 4)),
        idler_spatial_filter=0,
    )
    phase = hes_relative_phase(run_irreversible(hyper_source(src), spec).final_state)
    err = abs(phase - 0.87 * math.pi)
    report("3 phase propagation", err < 1e-10,
           f"0.37pi in, 45deg erasure -> {phase / math.pi:.12f} pi (err {err:.2e})")


def test_acceptance_04_concentration():
    b = 0.46
    a = math.sqrt(1 - b * b)
    proj = concentration_projector(b)
    spec = EraserSpec(erasure_projector=proj, idler_spatial_filter=0)
    result = run_irreversible(hyper_source(SourceParams(a=a, b=b)), spec)
    c = concurrence(result.final_state)
    erasure_p = result.normalization**2
    formula = 2 * (a * b) ** 2
    ok = abs(c - 1.0) < 1e-10 and abs(erasure_p - formula) < 1e-6
    report("4 concentration", ok,
           f"concurrence {c:.12f}, erasure probability {erasure_p:.7f} "
           f"vs 2|ab|^2 = {formula:.7f}")


def test_acceptance_04b_concentration_paper_rounded_targets():
    # Known red: the rounded targets contradict their own defining expressions
    # at the stated tolerances (arccos(0.46) = 62.61 deg; 2|ab|^2 = 0.3337).
    # Analysis lives in the project decision ledger.
    b = 0.46
    a = math.sqrt(1 - b * b)
    angle = polarizer_angle_degrees(concentration_projector(b))
    spec = EraserSpec(erasure_projector=concentration_projector(b), idler_spatial_filter=0)
    result = run_irreversible(hyper_source(SourceParams(a=a, b=b)), spec)
    erasure_p = result.normalization**2
    ok = abs(angle - 62.5) < 0.1 and abs(erasure_p - 0.335) < 1e-6
    report("4b concentration (paper-rounded targets)", ok,
           f"angle {angle:.4f} deg vs 62.5 +/- 0.1; "
           f"probability {erasure_p:.7f} vs 0.335 +/- 1e-6")


def test_acceptance_05_dilution_restoration():
    rng = np.random.default_rng(100)
    worst_diluted, worst_restored = 0.0, 0.0
    for _ in range(100):
        a = math.sqrt(rng.uniform(0.02, 0.98))
        b = math.sqrt(1 - a * a) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        result = run_reversible(generic_initial(a, b))
        pol = partial_trace(result.stage("post_cnot"), [POL_SIGNAL, POL_IDLER])
        hybrid = partial_trace(result.final_state, [POL_IDLER, spatial_signal(2)])
        worst_diluted = max(worst_diluted, concurrence(pol))
        worst_restored = max(worst_restored, abs(concurrence(hybrid) - 2 * a * abs(b)))
    report("5 dilution/restoration",
           worst_diluted < 1e-10 and worst_restored < 1e-10,
           f"max diluted concurrence {worst_diluted:.2e}, "
           f"max restoration error {worst_restored:.2e}")


def test_acceptance_06_measures_oracle_suite():
    rng = np.random.default_rng(21)
    space = CompositeSpace([POL_SIGNAL, POL_IDLER])
    worst = 0.0
    for _ in range(30):
        a = math.sqrt(rng.uniform(0.02, 0.98))
        b = math.sqrt(1 - a * a) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        ket = Ket(space, [a, 0, 0, b])
        worst = max(worst, abs(concurrence(ket) - 2 * a * abs(b)))
    bell = Ket(space, [S, 0, 0, S])
    for p in np.linspace(0.0, 1.0, 11):
        expected = max(0.0, (3 * p - 1) / 2)
        worst = max(worst, abs(concurrence(werner_mix(bell, p)) - expected))
    worst_neg = 0.0
    for dim in (2, 4, 8):
        a = math.sqrt(rng.uniform(0.1, 0.9))
        b = math.sqrt(1 - a * a)
        state = qudit_hes(dim, a, b, 0).final_state
        worst_neg = max(worst_neg, abs(negativity(state, [POL_IDLER]) - a * b))
    report("6 measures oracle suite", worst < 1e-8 and worst_neg < 1e-8,
           f"max concurrence error {worst:.2e}, max negativity error {worst_neg:.2e}")


def test_acceptance_07_tomography_round_trip():
    import time

    pset = build_projector_set("overcomplete36", "polarization-polarization")
    rng = np.random.default_rng(42)
    t0 = time.time()
    fids = []
    for seed in range(20):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        ket = Ket(CompositeSpace(pset.space.labels), v / np.linalg.norm(v))
        # 1e4 counts per row: per-row exposure 4e4 at mean probability ~ 1/4
        acq = AcquisitionSpec(duration=36 * 4e4, pair_rate=1.0, seed=seed)
        result = mle_reconstruct(tomography_counts(ket, pset, acq), pset)
        vals = np.linalg.eigvalsh(result.rho_hat.matrix)
        assert vals.min() >= -1e-12
        assert abs(np.trace(result.rho_hat.matrix).real - 1) < 1e-10
        fids.append(fidelity(result.rho_hat, ket))
    elapsed = time.time() - t0
    med = float(np.median(fids))
    report("7 tomography round trip", med >= 0.99 and elapsed < 60.0,
           f"median fidelity {med:.5f} over 20 seeds in {elapsed:.1f} s")


def test_acceptance_08_paper_statistics_bracket():
    pol_pset = build_projector_set("overcomplete36", "polarization-polarization")
    hes_pset = build_projector_set("overcomplete36", "polarization-spatial")
    bell_pol = Ket(CompositeSpace(pol_pset.space.labels), [S, 0, 0, S])
    ideal_hes = run_irreversible(hyper_source(SourceParams()), l_eraser()).final_state

    # zero hardware noise at the paper's two acquisition settings
    counts_pol = tomography_counts(bell_pol, pol_pset,
                                   AcquisitionSpec(duration=300.0, pair_rate=4.2, seed=0))
    f_pol = fidelity(mle_reconstruct(counts_pol, pol_pset).rho_hat, bell_pol)
    counts_hes = tomography_counts(ideal_hes, hes_pset,
                                   AcquisitionSpec(duration=600.0, pair_rate=1.8, seed=0))
    recon_hes = mle_reconstruct(counts_hes, hes_pset)
    f_hes = fidelity(recon_hes.rho_hat, ideal_hes)
    clean_ok = f_pol >= 0.97 and f_hes >= 0.97

    # QWP offsets swept over [1, 5] degrees on top of the phenomenological
    # decoherence floor calibrated to the paper's imperfections
    swept = []
    for eps in (1.0, 2.0, 3.0, 4.0, 5.0):
        noise = NoiseSpec(qwp_offset_degrees=(eps, eps), werner_p=0.95)
        rho, _ = perturbed_pipeline(SourceParams(), l_eraser(), noise)
        counts = tomography_counts(rho, hes_pset,
                                   AcquisitionSpec(duration=600.0, pair_rate=1.8, seed=0))
        swept.append(fidelity(mle_reconstruct(counts, hes_pset).rho_hat, ideal_hes))
    sweep_ok = all(0.90 <= f <= 0.97 for f in swept)

    boot = bootstrap_errors(recon_hes, counts_hes, hes_pset, n_resamples=50,
                            seed=1, target=ideal_hes)
    se = boot.bootstrap["fidelity_std"]
    se_ok = 0.005 <= se <= 0.04

    report("8 paper-statistics bracket", clean_ok and sweep_ok and se_ok,
           f"clean fidelities pol {f_pol:.4f} / hes {f_hes:.4f}; "
           f"sweep {['%.4f' % f for f in swept]}; bootstrap SE {se:.4f}")


def test_acceptance_09_spatial_concurrence_estimator():
    # c = d = 1/sqrt2: conditional pattern totals are Poisson with equal means
    # summing to ~1e4 coincidences per run
    acq = AcquisitionSpec(duration=1.0, pair_rate=2e4, seed=0)
    estimates = []
    for run in range(200):
        nf = sample_counts(0.25, acq, key=f"run{run}:F")
        na = sample_counts(0.25, acq, key=f"run{run}:A")
        estimates.append(concurrence_from_conditional_counts(ConditionalCounts(nf, na)))
    mean = float(np.mean(estimates))
    total = np.mean([sample_counts(0.5, acq, key=f"t{r}") for r in range(5)])
    report("9 spatial concurrence estimator",
           abs(mean - 1.0) < 0.02 and 9e3 < total < 1.1e4,
           f"estimator mean {mean:.5f} over 200 runs (~{total:.0f} coincidences each)")


def test_acceptance_10_diffraction_facts(tmp_path):
    out = tmp_path / "fig2d"
    assert cli.main(["reproduce", "fig2d_outputs", "--out", str(out), "--seed", "0"]) == 0

    def read_curve(name):
        rows = (out / f"scan_{name}.csv").read_text().splitlines()[1:]
        data = np.array([[float(v) for v in r.split(",")[:2]] for r in rows])
        return data[:, 0] * 1e-3, data[:, 1]

    x, y = read_curve("F")
    period = cli.measured_fringe_period(x, y)
    xs, ys = read_curve("slit0")
    env_zero = cli.measured_envelope_zero(xs, ys)
    ok = (abs(period - 0.842e-3) < 0.01 * 0.842e-3
          and abs(env_zero - 2.63e-3) < 0.01 * 2.63e-3)
    report("10 diffraction facts", ok,
           f"fringe period {period * 1e3:.4f} mm (target 0.842), "
           f"envelope zero {env_zero * 1e3:.4f} mm (target 2.63)")


def test_acceptance_11_malus_phase_signature(tmp_path):
    out = tmp_path / "fig2e"
    assert cli.main(["reproduce", "fig2e_phase", "--out", str(out), "--seed", "0"]) == 0
    rows = (out / "malus.csv").read_text().splitlines()
    header = rows[0].split(",")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    rad = np.radians(data[:, 0])
    expected = {"p_F": 0.0, "p_A": 90.0, "p_Fl": 45.0, "p_Fr": 135.0}
    worst = 0.0
    for col, target in expected.items():
        vals = data[:, header.index(col)]
        theta0 = 0.5 * math.degrees(math.atan2(float(np.sum(vals * np.sin(2 * rad))),
                                               float(np.sum(vals * np.cos(2 * rad)))))
        dist = min((theta0 - target) % 180, (target - theta0) % 180)
        worst = max(worst, dist)
    report("11 Malus phase signature", worst < 0.5,
           f"max extremum deviation {worst:.4f} deg across F, A, Fl, Fr")


def test_acceptance_12_bundle_determinism(tmp_path):
    mismatched = []
    for bundle in cli.BUNDLES:
        dirs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{bundle}_{tag}"
            code = cli.main(["reproduce", bundle, "--out", str(out), "--seed", "0"])
            assert code == 0, f"bundle {bundle} failed its checks"
            dirs.append(out)
        names = sorted(os.listdir(dirs[0]))
        assert names == sorted(os.listdir(dirs[1]))
        match, bad, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
        if bad or errors:
            mismatched.append((bundle, bad + errors))
    report("12 bundle determinism", not mismatched,
           f"all {len(cli.BUNDLES)} bundles byte-identical on re-run"
           if not mismatched else f"mismatches: {mismatched}")
