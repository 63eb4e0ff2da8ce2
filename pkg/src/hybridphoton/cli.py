"""Scenario-driven command-line front end.

Subcommands: ``generate`` (run the pipeline, emit states and metrics),
``scan`` (far-field detector scans), ``tomo`` (simulated tomography plus
reconstruction), and ``reproduce`` (named preset bundles with pass/fail
checks). All artifacts are deterministic given the config and seed; nothing
timestamped is ever written, so re-runs are byte-identical.

Exit codes: 0 success, 1 failed bundle checks, 2 config/validation error,
3 zero-probability projection, 4 tomography non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config, parse_config, with_seed
from .core import CompositeSpace, DensityOperator, Ket, NullProjectionError, partial_trace
from .elements import (
    KET_H,
    KET_V,
    linear_polarizer_vector,
    mode_family,
    sptq_cnot,
    spatial_qubit_mubs,
)
from .measures import concurrence, concurrence_from_conditional_counts, ConditionalCounts, fidelity, negativity, purity
from .protocol import (
    POL_IDLER,
    POL_SIGNAL,
    generic_initial,
    hes_relative_phase,
    hyper_source,
    qudit_hes,
    run_irreversible,
    run_reversible,
    spatial_idler,
    spatial_signal,
    werner_mix,
)
from .simulate import child_seed, perturbed_pipeline, scan_run, tomography_counts
from .tomography import PROJECTOR_SET_KINDS, bootstrap_errors, build_projector_set, mle_reconstruct

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_VALIDATION = 2
EXIT_NULL_PROJECTION = 3
EXIT_NO_CONVERGENCE = 4


# ---------------------------------------------------------------------------
# artifact helpers


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ket_doc(ket: Ket) -> dict:
    return {
        "labels": [str(lab) for lab in ket.space.labels],
        "amplitudes_real": [float(v) for v in ket.amplitudes.real],
        "amplitudes_imag": [float(v) for v in ket.amplitudes.imag],
    }


def _rho_doc(rho: DensityOperator) -> dict:
    return {
        "labels": [str(lab) for lab in rho.space.labels],
        "rho_real": [[float(v) for v in row] for row in rho.matrix.real],
        "rho_imag": [[float(v) for v in row] for row in rho.matrix.imag],
    }


def _state_doc(state) -> dict:
    return _ket_doc(state) if isinstance(state, Ket) else _rho_doc(state)


def _noise_is_trivial(config: ScenarioConfig) -> bool:
    n = config.noise
    return (n.qwp_offset_degrees == (0.0, 0.0)
            and n.qwp_retardance_error == 0.0
            and n.werner_p == 1.0)


def _analytic_hes_target(config: ScenarioConfig, dimension: int = 2, j: int = 0) -> Ket:
    """Closed-form hybrid target: erase the signal polarization by hand.

    The gate sends the V branch to the paired mode with phase i; projecting
    the signal polarization onto (alpha, beta) leaves
    a*conj(alpha)|H, F_j> + i*b*conj(beta)|V, F_{j+n}> over
    (idler polarization, signal spatial).
    """
    fam = mode_family(dimension)
    alpha, beta = config.eraser.erasure_projector.principal_vector()
    ah = config.source.a * np.conj(alpha)
    av = 1j * config.source.b * np.conj(beta)
    amps = ah * np.kron(KET_H, fam.mode(j)) + av * np.kron(KET_V, fam.mode(j + fam.pair_shift))
    space = CompositeSpace([POL_IDLER, spatial_signal(dimension)])
    return Ket(space, amps).normalized().canonicalized()


# ---------------------------------------------------------------------------
# fringe diagnostics on sampled curves


def _refined_local_minima(x, y):
    """Positions of interior local minima, parabolic sub-sample refinement."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = []
    for k in range(1, y.size - 1):
        if y[k] < y[k - 1] and y[k] <= y[k + 1]:
            denom = y[k - 1] - 2.0 * y[k] + y[k + 1]
            off = 0.5 * (y[k - 1] - y[k + 1]) / denom if denom > 0 else 0.0
            out.append(float(x[k] + off * (x[k + 1] - x[k])))
    return out


def measured_fringe_period(x, y) -> float:
    """Distance between the two minima flanking the global maximum.

    Fringe minima are exact zeros of the interference term, so unlike the
    maxima they are not pulled around by the diffraction envelope.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_peak = float(x[np.argmax(y)])
    minima = _refined_local_minima(x, y)
    left = [m for m in minima if m < x_peak]
    right = [m for m in minima if m > x_peak]
    if not left or not right:
        raise ValueError("curve has no minima flanking the central peak")
    return min(right) - max(left)


def measured_envelope_zero(x, y) -> float:
    """First minimum at positive position of a single-slit curve."""
    minima = sorted(m for m in _refined_local_minima(x, y) if m > 0)
    if not minima:
        raise ValueError("curve has no positive-side minimum")
    return minima[0]


def fringe_visibility(x, y, geometry) -> float:
    """Envelope-corrected fringe visibility of a sampled intensity curve.

    Compares the center intensity with the intensity half a fringe period
    away, rescaled by the single-slit envelope so a pure envelope (no
    fringes) scores zero and full-contrast fringes score one.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    half = geometry.fringe_period / 2.0
    i0 = float(np.interp(0.0, x, y))
    ih = float(np.interp(half, x, y))
    lam_f = geometry.wavelength * geometry.focal_length
    env = float(np.sinc(geometry.slit_width * half / lam_f) ** 2)
    corrected = ih / env
    if i0 + corrected <= 0.0:
        raise ValueError("visibility undefined on an all-zero curve")
    return (i0 - corrected) / (i0 + corrected)


# ---------------------------------------------------------------------------
# generate


def _generate(config: ScenarioConfig, outdir: str) -> int:
    seed = config.acquisition.seed
    metrics = {"seed": seed, "version": __version__}
    stage_docs = {}

    if config.qudit_enabled:
        dim, j = config.qudit_dimension, config.qudit_mode
        result = qudit_hes(dim, config.source.a, config.source.b, j)
        final = result.final_state
        target = _analytic_hes_target(config, dim, j)
        metrics.update({
            "success_probability": result.success_probability,
            "negativity": negativity(final, [POL_IDLER]),
            "fidelity_analytic_target": fidelity(final, target),
            "hes_phase": hes_relative_phase(final, dim, j),
        })
        state_out = final if config.noise.werner_p == 1.0 else werner_mix(final, config.noise.werner_p)
        if isinstance(state_out, DensityOperator):
            metrics["negativity"] = negativity(state_out, [POL_IDLER])
            metrics["fidelity_analytic_target"] = fidelity(state_out, target)
    elif config.eraser.variant == "reversible":
        result = run_reversible(generic_initial(config.source.a, config.source.b))
        hybrid = partial_trace(result.final_state, [POL_IDLER, spatial_signal(2)])
        target = Ket(
            CompositeSpace([POL_IDLER, spatial_signal(2)]),
            config.source.a * np.kron(KET_H, mode_family(2).mode(0))
            + 1j * config.source.b * np.kron(KET_V, mode_family(2).mode(1)),
        ).normalized()
        metrics.update({
            "success_probability": result.success_probability,
            "concurrence": concurrence(hybrid),
            "fidelity_analytic_target": fidelity(hybrid, target),
        })
        state_out = result.final_state
    else:
        if _noise_is_trivial(config):
            result = run_irreversible(hyper_source(config.source), config.eraser)
            if result.null_projection:
                raise NullProjectionError("erasure projection annihilated the state")
            state_out = result.final_state
            metrics["hes_phase"] = hes_relative_phase(state_out)
        else:
            state_out, result = perturbed_pipeline(config.source, config.eraser, config.noise)
            if state_out is None:
                raise NullProjectionError("erasure projection annihilated the state")
        target = _analytic_hes_target(config)
        metrics.update({
            "success_probability": result.success_probability,
            "concurrence": concurrence(state_out),
            "negativity": negativity(state_out, [POL_IDLER]),
            "fidelity_analytic_target": fidelity(state_out, target),
        })

    for name, state in result.stage_states:
        stage_docs[name] = _ket_doc(state)

    os.makedirs(outdir, exist_ok=True)
    _write_json(os.path.join(outdir, "state_final.json"), _state_doc(state_out))
    _write_json(os.path.join(outdir, "stages.json"), stage_docs)
    _write_json(os.path.join(outdir, "metrics.json"),
                {"metrics": metrics, "config": config.raw})
    return EXIT_OK


# ---------------------------------------------------------------------------
# scan


_SCAN_CONDITIONINGS = ("F", "A", "s0", "s1", "none")


def _conditioning_vector(name: str, dimension: int):
    fam = mode_family(dimension)
    if name == "none":
        return None
    if name == "F":
        return fam.mode(0)
    if name == "A":
        return fam.mode(fam.pair_shift)
    if name in ("s0", "s1") and dimension == 2:
        vec = np.zeros(dimension, dtype=complex)
        vec[0 if name == "s0" else 1] = 1.0
        return vec
    raise ConfigError(f"unsupported conditioning {name!r} for D={dimension}")


def _spatial_pair_state(config: ScenarioConfig, dimension: int) -> Ket:
    fam = mode_family(dimension)
    amps = (config.source.c * np.kron(fam.mode(0), fam.mode(0))
            + config.source.d * np.kron(fam.mode(fam.pair_shift), fam.mode(fam.pair_shift)))
    return Ket(CompositeSpace([spatial_signal(dimension), spatial_idler(dimension)]), amps)


def _scan(config: ScenarioConfig, outdir: str, conditionings, xmin: float,
          xmax: float, steps: int) -> int:
    geometry = config.geometry
    dim = geometry.slit_count
    positions = np.linspace(xmin, xmax, steps)
    state = _spatial_pair_state(config, dim)
    os.makedirs(outdir, exist_ok=True)

    curve_metrics, totals = {}, {}
    for name in conditionings:
        vec = _conditioning_vector(name, dim)
        acq = replace(config.acquisition,
                      seed=child_seed(config.acquisition.seed, f"scan:{name}"))
        try:
            curve = scan_run(state, geometry, positions, acq, conditioning=vec)
        except ValueError as exc:
            if "zero probability" in str(exc):
                raise NullProjectionError(str(exc)) from exc
            raise
        path = os.path.join(outdir, f"scan_{name}.csv")
        curve.write_csv(path)
        info = {
            "conditioning_probability": curve.conditioning_probability,
            "total_counts": int(curve.counts.sum()),
            "visibility": fringe_visibility(positions, curve.intensity, geometry),
        }
        try:
            info["fringe_period_mm"] = measured_fringe_period(positions, curve.intensity) * 1e3
        except ValueError:
            info["fringe_period_mm"] = None
        curve_metrics[name] = info
        totals[name] = int(curve.counts.sum())

    metrics = {"curves": curve_metrics, "seed": config.acquisition.seed,
               "version": __version__}
    if "F" in totals and "A" in totals and totals["F"] + totals["A"] > 0:
        metrics["concurrence_estimate"] = concurrence_from_conditional_counts(
            ConditionalCounts(totals["F"], totals["A"])
        )
    _write_json(os.path.join(outdir, "scan_metrics.json"),
                {"metrics": metrics, "config": config.raw})
    return EXIT_OK


# ---------------------------------------------------------------------------
# tomo


def _tomo(config: ScenarioConfig, outdir: str, target: str, settings: str,
          resamples: int):
    """Simulate tomography counts, reconstruct, bootstrap. Returns
    (exit_code, metrics dict)."""
    acq = config.acquisition
    if target == "polarization":
        ideal = Ket(CompositeSpace([POL_SIGNAL, POL_IDLER]),
                    [config.source.a, 0.0, 0.0, config.source.b]).canonicalized()
        measured = ideal
        pset = build_projector_set(settings, "polarization-polarization")
        counts = tomography_counts(measured, pset, acq, noise=config.noise)
    elif target == "hes":
        if config.eraser.variant != "irreversible":
            raise ConfigError("eraser.variant: hybrid-state tomography needs the irreversible eraser")
        ideal_result = run_irreversible(hyper_source(config.source), config.eraser)
        if ideal_result.null_projection:
            raise NullProjectionError("erasure projection annihilated the state")
        ideal = ideal_result.final_state
        rho, result = perturbed_pipeline(config.source, config.eraser, config.noise)
        if rho is None:
            raise NullProjectionError("erasure projection annihilated the state")
        pset = build_projector_set(settings, "polarization-spatial")
        counts = tomography_counts(rho, pset, acq, noise=None)
    else:
        raise ConfigError(f"target: expected 'polarization' or 'hes', got {target!r}")

    os.makedirs(outdir, exist_ok=True)
    if "csv" in config.output_formats:
        counts.write_csv(os.path.join(outdir, "counts.csv"))
    recon = mle_reconstruct(counts, pset)
    if resamples > 0:
        recon = bootstrap_errors(recon, counts, pset, n_resamples=resamples,
                                 seed=child_seed(acq.seed, "bootstrap"), target=ideal)
    metrics = {
        "fidelity": fidelity(recon.rho_hat, ideal),
        "concurrence": concurrence(recon.rho_hat),
        "purity": purity(recon.rho_hat),
        "converged": recon.converged,
        "iterations": recon.iterations,
        "seed": acq.seed,
        "version": __version__,
    }
    if target == "hes":
        metrics["success_probability"] = result.success_probability
        metrics["ideal_hes_phase"] = hes_relative_phase(ideal)
    recon.write_json(os.path.join(outdir, "reconstruction.json"),
                     config_echo=config.raw, seed=acq.seed)
    _write_json(os.path.join(outdir, "tomo_metrics.json"),
                {"metrics": metrics, "config": config.raw})
    code = EXIT_OK if recon.converged else EXIT_NO_CONVERGENCE
    return code, metrics


# ---------------------------------------------------------------------------
# reproduce bundles


def _write_manifest(outdir: str, bundle: str, seed: int, config_raw: dict):
    os.makedirs(outdir, exist_ok=True)
    _write_json(os.path.join(outdir, "manifest.json"), {
        "bundle": bundle,
        "seed": seed,
        "config": config_raw,
        "version": __version__,
    })


def _config_for(bundle_overrides: dict, seed: int) -> ScenarioConfig:
    config = parse_config(bundle_overrides)
    return with_seed(config, seed)


def _check(name, passed, detail):
    return {"check": name, "passed": bool(passed), "detail": detail}


def _angle_distance(a: float, b: float, period: float = 180.0) -> float:
    d = (a - b) % period
    return min(d, period - d)


def _bundle_fig2c(outdir: str, seed: int):
    config = _config_for({}, seed)
    _write_manifest(outdir, "fig2c_truth_table", seed, config.raw)
    fam = mode_family(2)
    gate = sptq_cnot(2)
    names = ("H&F", "H&A", "V&F", "V&A")
    basis = [np.kron(p, m) for p in (KET_H, KET_V) for m in (fam.mode(0), fam.mode(1))]
    amp = np.array([[np.vdot(bo, gate @ bi) for bi in basis] for bo in basis])
    with open(os.path.join(outdir, "truth_table.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["input", "output", "amplitude_real", "amplitude_imag", "probability"])
        for i, name_in in enumerate(names):
            for o, name_out in enumerate(names):
                writer.writerow([name_in, name_out, repr(amp[o, i].real),
                                 repr(amp[o, i].imag), repr(abs(amp[o, i]) ** 2)])
    expected = {0: 0, 1: 1, 2: 3, 3: 2}  # H passes through, V swaps F and A
    checks = []
    for i in range(4):
        on_target = abs(amp[expected[i], i]) ** 2
        off_target = sum(abs(amp[o, i]) ** 2 for o in range(4) if o != expected[i])
        checks.append(_check(
            f"input {names[i]} routes to {names[expected[i]]}",
            abs(on_target - 1.0) < 1e-12 and off_target < 1e-12,
            f"on-target probability {on_target:.15f}, off-target {off_target:.3e}",
        ))
    return checks


def _bundle_fig2d(outdir: str, seed: int):
    config = _config_for({}, seed)
    _write_manifest(outdir, "fig2d_outputs", seed, config.raw)
    geometry = config.geometry
    fam = mode_family(2)
    gate = sptq_cnot(2)
    positions = np.linspace(-5e-3, 5e-3, 1001)
    # conditional spatial outputs for the two polarization branches of |F> in
    out_f = (gate @ np.kron(KET_H, fam.mode(0))).reshape(2, 2)[0]
    out_a = (gate @ np.kron(KET_V, fam.mode(0))).reshape(2, 2)[1]
    single = np.array([1.0, 0.0], dtype=complex)
    curves = {}
    for name, amps in (("F", out_f), ("A", out_a), ("slit0", single)):
        state = Ket(CompositeSpace([spatial_signal(2)]), amps / np.linalg.norm(amps))
        acq = replace(config.acquisition, seed=child_seed(seed, f"fig2d:{name}"))
        curve = scan_run(state, geometry, positions, acq)
        curve.write_csv(os.path.join(outdir, f"scan_{name}.csv"))
        curves[name] = curve
    period = measured_fringe_period(positions, curves["F"].intensity)
    env_zero = measured_envelope_zero(positions, curves["slit0"].intensity)
    x_peak = positions[np.argmax(curves["F"].intensity)]
    a_center = float(np.interp(0.0, positions, curves["A"].intensity))
    a_max = float(curves["A"].intensity.max())
    return [
        _check("F output peaks at the pattern center",
               abs(x_peak) < geometry.fringe_period / 10,
               f"peak at {x_peak * 1e3:.4f} mm"),
        _check("A output is dark at the pattern center",
               a_center < 0.01 * a_max,
               f"center/max intensity ratio {a_center / a_max:.2e}"),
        _check("fringe period matches lambda*f/d within 1%",
               abs(period - geometry.fringe_period) < 0.01 * geometry.fringe_period,
               f"measured {period * 1e3:.4f} mm vs {geometry.fringe_period * 1e3:.4f} mm"),
        _check("envelope first zero matches lambda*f/w within 1%",
               abs(env_zero - geometry.envelope_first_zero) < 0.01 * geometry.envelope_first_zero,
               f"measured {env_zero * 1e3:.4f} mm vs {geometry.envelope_first_zero * 1e3:.4f} mm"),
    ]


def _bundle_fig2e(outdir: str, seed: int):
    config = _config_for({}, seed)
    _write_manifest(outdir, "fig2e_phase", seed, config.raw)
    fam = mode_family(2)
    gate = sptq_cnot(2)
    state = gate @ np.kron((KET_H + KET_V) / math.sqrt(2), fam.mode(0))
    spatial = {name: vec for basis in spatial_qubit_mubs()[1:] for name, vec in basis}
    angles = np.arange(0.0, 180.0, 1.0)
    table = {name: [] for name in ("F", "A", "Fl", "Fr")}
    for theta in angles:
        pol = linear_polarizer_vector(math.radians(theta))
        for name in table:
            proj = np.kron(pol, spatial[name])
            table[name].append(float(abs(np.vdot(proj, state)) ** 2))
    with open(os.path.join(outdir, "malus.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg", "p_F", "p_A", "p_Fl", "p_Fr"])
        for k, theta in enumerate(angles):
            writer.writerow([repr(float(theta))]
                            + [repr(table[name][k]) for name in ("F", "A", "Fl", "Fr")])
    expected = {"F": 0.0, "A": 90.0, "Fl": 45.0, "Fr": 135.0}
    checks = []
    rad = np.radians(angles)
    for name, target in expected.items():
        values = np.array(table[name])
        # exact extremum of the A + B cos(2 theta - 2 theta0) Malus curve from
        # the quadrature sums over the uniform angle grid
        theta0 = 0.5 * math.degrees(math.atan2(float(np.sum(values * np.sin(2 * rad))),
                                               float(np.sum(values * np.cos(2 * rad)))))
        dist = _angle_distance(theta0, target)
        checks.append(_check(
            f"{name} Malus curve peaks at {target:g} deg",
            dist < 0.5, f"extremum at {theta0 % 180:.4f} deg (off by {dist:.4f} deg)",
        ))
    return checks


def _tomo_bundle_checks(metrics, fidelity_floor=0.97):
    boot = metrics.get("bootstrap") or {}
    fid_std = boot.get("fidelity_std")
    checks = [
        _check("reconstruction converged", metrics["converged"],
               f"{metrics['iterations']} iterations"),
        _check(f"reconstructed fidelity >= {fidelity_floor:g}",
               metrics["fidelity"] >= fidelity_floor,
               f"fidelity {metrics['fidelity']:.4f}"),
    ]
    if fid_std is not None:
        checks.append(_check(
            "bootstrap fidelity standard error in [0.5%, 4%]",
            0.005 <= fid_std <= 0.04, f"std {fid_std:.4f}",
        ))
    return checks


def _run_tomo_bundle(outdir, name, overrides, seed, target, resamples=50,
                     fidelity_floor=0.97):
    config = _config_for(overrides, seed)
    _write_manifest(outdir, name, seed, config.raw)
    code, metrics = _tomo(config, outdir, target, "overcomplete36", resamples)
    with open(os.path.join(outdir, "reconstruction.json")) as fh:
        metrics["bootstrap"] = json.load(fh)["bootstrap"]
    checks = _tomo_bundle_checks(metrics, fidelity_floor)
    if code != EXIT_OK:
        checks.append(_check("tomography exit status", False, f"exit code {code}"))
    return config, metrics, checks


_PARTIAL_SOURCE = {
    "a": 0.89 / math.hypot(0.89, 0.46),
    "b": 0.46 / math.hypot(0.89, 0.46),
    "phase_pol": 0.37 * math.pi,
}


def _bundle_fig3c(outdir: str, seed: int):
    _, _, checks = _run_tomo_bundle(outdir, "fig3c_bell_pol", {}, seed, "polarization")
    return checks


def _bundle_fig3d(outdir: str, seed: int):
    overrides = {"acquisition": {"duration_s": 600.0, "pair_rate_hz": 1.8}}
    _, metrics, checks = _run_tomo_bundle(outdir, "fig3d_bell_hes", overrides, seed, "hes")
    checks.append(_check(
        "pipeline success probability is 1/4",
        abs(metrics["success_probability"] - 0.25) < 1e-9,
        f"success probability {metrics['success_probability']:.12f}",
    ))
    return checks


def _bundle_fig3e(outdir: str, seed: int):
    overrides = {"source": dict(_PARTIAL_SOURCE),
                 "acquisition": {"duration_s": 1200.0}}
    config, metrics, checks = _run_tomo_bundle(outdir, "fig3e_partial_pol", overrides,
                                               seed, "polarization", fidelity_floor=0.95)
    target_c = 2.0 * abs(config.source.a) * abs(config.source.b)
    checks.append(_check(
        "reconstructed concurrence matches 2|ab| within 0.1",
        abs(metrics["concurrence"] - target_c) < 0.1,
        f"concurrence {metrics['concurrence']:.4f} vs 2|ab| = {target_c:.4f}",
    ))
    return checks


def _bundle_fig3f(outdir: str, seed: int):
    overrides = {
        "source": dict(_PARTIAL_SOURCE),
        "eraser": {"projector_angle_deg": 45.0, "circular": None},
        "acquisition": {"duration_s": 600.0, "pair_rate_hz": 1.8},
    }
    _, metrics, checks = _run_tomo_bundle(outdir, "fig3f_partial_hes", overrides, seed, "hes")
    phase = metrics["ideal_hes_phase"]
    checks.append(_check(
        "ideal hybrid phase is 0.87 pi",
        abs(phase - 0.87 * math.pi) < 1e-9,
        f"phase {phase / math.pi:.6f} pi",
    ))
    return checks


def _bundle_fig3g(outdir: str, seed: int):
    b_norm = _PARTIAL_SOURCE["b"]
    angle = math.degrees(math.acos(b_norm))
    overrides = {
        "source": dict(_PARTIAL_SOURCE),
        "eraser": {"projector_angle_deg": angle, "circular": None},
        "acquisition": {"duration_s": 600.0, "pair_rate_hz": 1.8},
    }
    config, metrics, checks = _run_tomo_bundle(outdir, "fig3g_concentrated", overrides,
                                               seed, "hes", fidelity_floor=0.95)
    ideal = run_irreversible(hyper_source(config.source), config.eraser)
    ideal_c = concurrence(ideal.final_state)
    erasure_p = 2.0 * (abs(config.source.a) * abs(config.source.b)) ** 2
    expected_p = 0.5 * erasure_p  # idler mode filter costs another factor 1/2
    checks.extend([
        _check("concentrated ideal state is maximally entangled",
               abs(ideal_c - 1.0) < 1e-10, f"ideal concurrence {ideal_c:.12f}"),
        _check("success probability equals (1/2) * 2|ab|^2",
               abs(metrics["success_probability"] - expected_p) < 1e-9,
               f"{metrics['success_probability']:.9f} vs {expected_p:.9f}"),
        _check("reconstructed concurrence >= 0.9",
               metrics["concurrence"] >= 0.9,
               f"concurrence {metrics['concurrence']:.4f}"),
    ])
    return checks


def _bundle_schmidt(outdir: str, seed: int):
    config = _config_for({}, seed)
    _write_manifest(outdir, "schmidt_scan", seed, config.raw)
    _scan(config, outdir, ("F", "A", "none"), -3e-3, 3e-3, 601)
    with open(os.path.join(outdir, "scan_metrics.json")) as fh:
        metrics = json.load(fh)["metrics"]
    curves = metrics["curves"]
    geometry = config.geometry
    period = curves["F"]["fringe_period_mm"]
    estimate = metrics["concurrence_estimate"]
    return [
        _check("F-conditioned fringes at full visibility",
               curves["F"]["visibility"] >= 0.98,
               f"visibility {curves['F']['visibility']:.4f}"),
        _check("A-conditioned fringes at full visibility",
               abs(curves["A"]["visibility"]) >= 0.98,
               f"visibility {curves['A']['visibility']:.4f} (sign marks the half-period shift)"),
        _check("marginal scan shows no fringes",
               abs(curves["none"]["visibility"]) <= 0.02,
               f"visibility {curves['none']['visibility']:.4f}"),
        _check("fringe period matches lambda*f/d within 1%",
               abs(period * 1e-3 - geometry.fringe_period) < 0.01 * geometry.fringe_period,
               f"measured {period:.4f} mm vs {geometry.fringe_period * 1e3:.4f} mm"),
        _check("conditional-counts concurrence estimate near 1",
               abs(estimate - 1.0) <= 0.05, f"estimate {estimate:.4f}"),
    ]


BUNDLES = {
    "fig2c_truth_table": _bundle_fig2c,
    "fig2d_outputs": _bundle_fig2d,
    "fig2e_phase": _bundle_fig2e,
    "fig3c_bell_pol": _bundle_fig3c,
    "fig3d_bell_hes": _bundle_fig3d,
    "fig3e_partial_pol": _bundle_fig3e,
    "fig3f_partial_hes": _bundle_fig3f,
    "fig3g_concentrated": _bundle_fig3g,
    "schmidt_scan": _bundle_schmidt,
}


def _reproduce(name: str, outdir: str, seed: int, stream=None) -> int:
    stream = stream or sys.stdout
    if name not in BUNDLES:
        print(f"unknown bundle {name!r}; available bundles:", file=sys.stderr)
        for known in BUNDLES:
            print(f"  {known}", file=sys.stderr)
        return EXIT_VALIDATION
    checks = BUNDLES[name](outdir, seed)
    _write_json(os.path.join(outdir, "checks.json"), checks)
    width = max(len(c["check"]) for c in checks)
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] {name}: {c['check']:<{width}}  {c['detail']}", file=stream)
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECKS_FAILED


# ---------------------------------------------------------------------------
# argument parsing


def _load(args) -> ScenarioConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = with_seed(config, args.seed)
    if args.format is not None:
        formats = tuple(f.strip() for f in args.format.split(","))
        if any(f not in ("csv", "json") for f in formats):
            raise ConfigError("--format: expected a comma list drawn from csv,json")
        config = replace(config, output_formats=formats)
    return config


def _outdir(args, config: ScenarioConfig) -> str:
    return args.out if args.out is not None else config.output_directory


def _cmd_generate(args) -> int:
    config = _load(args)
    return _generate(config, _outdir(args, config))


def _cmd_scan(args) -> int:
    config = _load(args)
    if args.steps < 16:
        raise ConfigError("--steps: need at least 16 scan positions")
    if args.xmax_mm <= args.xmin_mm:
        raise ConfigError("--xmax-mm must exceed --xmin-mm")
    return _scan(config, _outdir(args, config), tuple(args.conditioning),
                 args.xmin_mm * 1e-3, args.xmax_mm * 1e-3, args.steps)


def _cmd_tomo(args) -> int:
    config = _load(args)
    if args.resamples < 0:
        raise ConfigError("--resamples: must be nonnegative")
    code, _ = _tomo(config, _outdir(args, config), args.target, args.settings,
                    args.resamples)
    return code


def _cmd_reproduce(args) -> int:
    outdir = args.out if args.out is not None else os.path.join("out", args.bundle)
    return _reproduce(args.bundle, outdir, args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridphoton",
        description="Simulate hybrid photonic entanglement experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario config (JSON)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--format", default=None, help="comma list from csv,json")

    p = sub.add_parser("generate", help="run the generation pipeline")
    common(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("scan", help="far-field detector scans")
    common(p)
    p.add_argument("--conditioning", nargs="+", default=["F", "A", "none"],
                   choices=_SCAN_CONDITIONINGS, help="idler conditioning per curve")
    p.add_argument("--xmin-mm", type=float, default=-3.0)
    p.add_argument("--xmax-mm", type=float, default=3.0)
    p.add_argument("--steps", type=int, default=601)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("tomo", help="simulated tomography and reconstruction")
    common(p)
    p.add_argument("--target", default="hes", choices=("hes", "polarization"))
    p.add_argument("--settings", default="overcomplete36", choices=PROJECTOR_SET_KINDS)
    p.add_argument("--resamples", type=int, default=100, help="bootstrap resamples (0 disables)")
    p.set_defaults(func=_cmd_tomo)

    p = sub.add_parser("reproduce", help="run a named preset bundle")
    p.add_argument("bundle", help="bundle name ('list' prints the catalog)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "bundle", None) == "list":
        for name in BUNDLES:
            print(name)
        return EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NullProjectionError as exc:
        print(f"null projection: {exc}", file=sys.stderr)
        return EXIT_NULL_PROJECTION


if __name__ == "__main__":
    sys.exit(main())
